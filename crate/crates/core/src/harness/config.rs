use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ann::{read_arm_embeddings, HnswParams};
use crate::env::{
    load_sparse_dataset, ClassificationEnv, ContinuumEnv, Environment, HFunction, RecommendationEnv, SyntheticEnv,
};
use crate::error::{Error, Result};
use crate::fastbandit::AscentConfig;
use crate::gan::GanConfig;
use crate::policy::{CovarianceMode, TrainConfig};

fn one() -> f64 {
    1.0
}
fn eight() -> usize {
    8
}
fn thousand() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EnvSpec {
    Synthetic {
        function: HFunction,
        arms: usize,
        dim: usize,
        #[serde(default = "one")]
        noise: f64,
    },
    Classification {
        path: PathBuf,
        #[serde(default)]
        arms_path: Option<PathBuf>,
        #[serde(default = "eight")]
        embed_dim: usize,
    },
    Recommendation {
        users: usize,
        items: usize,
        #[serde(default = "eight")]
        dim: usize,
    },
    Continuum {
        #[serde(default = "thousand")]
        grid: usize,
        #[serde(default)]
        noise: f64,
    },
}

impl EnvSpec {
    pub fn build(&self, seed: u64) -> Result<Box<dyn Environment>> {
        Ok(match self {
            EnvSpec::Synthetic {
                function,
                arms,
                dim,
                noise,
            } => Box::new(SyntheticEnv::new(*function, *arms, *dim, *noise, seed)?),
            EnvSpec::Classification {
                path,
                arms_path,
                embed_dim,
            } => {
                let data = load_sparse_dataset(path)?;
                let arms = arms_path.as_ref().map(read_arm_embeddings).transpose()?;
                Box::new(ClassificationEnv::new(data, arms, *embed_dim, seed)?)
            }
            EnvSpec::Recommendation { users, items, dim } => {
                Box::new(RecommendationEnv::new(*users, *items, *dim, seed)?)
            }
            EnvSpec::Continuum { grid, noise } => Box::new(ContinuumEnv::new(*grid, *noise, seed)?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyName {
    Random,
    Bestarm,
    LinearTs,
    ExhaustTs,
    ExhaustUcb,
    FastTs,
    FastUcb,
    GanTs,
    GanUcb,
}

impl PolicyName {
    pub const ALL: [PolicyName; 9] = [
        PolicyName::Random,
        PolicyName::Bestarm,
        PolicyName::LinearTs,
        PolicyName::ExhaustTs,
        PolicyName::ExhaustUcb,
        PolicyName::FastTs,
        PolicyName::FastUcb,
        PolicyName::GanTs,
        PolicyName::GanUcb,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyName::Random => "random",
            PolicyName::Bestarm => "bestarm",
            PolicyName::LinearTs => "linear-ts",
            PolicyName::ExhaustTs => "exhaust-ts",
            PolicyName::ExhaustUcb => "exhaust-ucb",
            PolicyName::FastTs => "fast-ts",
            PolicyName::FastUcb => "fast-ucb",
            PolicyName::GanTs => "gan-ts",
            PolicyName::GanUcb => "gan-ucb",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown policy {s:?}")))
    }

    pub fn is_ucb(self) -> bool {
        matches!(self, PolicyName::ExhaustUcb | PolicyName::FastUcb | PolicyName::GanUcb)
    }
}

impl fmt::Display for PolicyName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Hidden layer widths of the reward model.
    pub hidden: Vec<usize>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { hidden: vec![8, 8] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UcbConfig {
    pub mode: CovarianceMode,
    pub lambda: f64,
    pub gamma: f64,
}

impl Default for UcbConfig {
    fn default() -> Self {
        Self {
            mode: CovarianceMode::Diagonal,
            lambda: 1.0,
            gamma: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinearTsConfig {
    /// Posterior sampling scale `v`.
    pub scale: f64,
    pub lambda: f64,
}

impl Default for LinearTsConfig {
    fn default() -> Self {
        Self {
            scale: 1.0,
            lambda: 1.0,
        }
    }
}

fn default_rounds() -> usize {
    5000
}
fn default_batch() -> usize {
    500
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub environment: EnvSpec,
    pub policy: PolicyName,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub ucb: UcbConfig,
    #[serde(default)]
    pub ascent: AscentConfig,
    #[serde(default)]
    pub gan: GanConfig,
    #[serde(default)]
    pub ann: HnswParams,
    #[serde(default)]
    pub linear_ts: LinearTsConfig,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Write measured selection latency to the CSV. Off by default so reruns
    /// produce identical files.
    #[serde(default)]
    pub record_latency: bool,
}

impl ExperimentConfig {
    pub fn new(environment: EnvSpec, policy: PolicyName) -> Self {
        Self {
            environment,
            policy,
            rounds: default_rounds(),
            batch_size: default_batch(),
            seed: 0,
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            ucb: UcbConfig::default(),
            ascent: AscentConfig::default(),
            gan: GanConfig::default(),
            ann: HnswParams::default(),
            linear_ts: LinearTsConfig::default(),
            output: None,
            record_latency: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 || self.batch_size == 0 {
            return Err(Error::Config("rounds and batch_size must be >= 1".into()));
        }
        if self.model.hidden.is_empty() || self.model.hidden.contains(&0) {
            return Err(Error::Config("model.hidden needs at least one non-zero layer".into()));
        }
        if !(0.0..1.0).contains(&self.train.dropout) {
            return Err(Error::Config(format!("dropout must lie in [0, 1), got {}", self.train.dropout)));
        }
        if self.train.minibatch == 0 {
            return Err(Error::Config("train.minibatch must be >= 1".into()));
        }
        if !(self.ucb.lambda > 0.0) || !(self.ucb.gamma >= 0.0) {
            return Err(Error::Config("ucb needs lambda > 0 and gamma >= 0".into()));
        }
        if !(self.linear_ts.lambda > 0.0) || !(self.linear_ts.scale >= 0.0) {
            return Err(Error::Config("linear_ts needs lambda > 0 and scale >= 0".into()));
        }
        self.ascent.validate()?;
        self.gan.validate()?;
        self.ann.validate()?;
        if matches!(self.environment, EnvSpec::Continuum { .. })
            && matches!(self.policy, PolicyName::FastTs | PolicyName::FastUcb)
        {
            return Err(Error::Config(
                "fast policies snap to arms; use exhaust or gan policies on the continuum".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_json_uses_defaults() {
        let cfg = ExperimentConfig::from_json(
            r#"{"environment": {"kind": "synthetic", "function": "h2", "arms": 100, "dim": 4},
                "policy": "fast-ts"}"#,
        )
        .unwrap();
        assert_eq!(cfg.rounds, 5000);
        assert_eq!(cfg.batch_size, 500);
        assert_eq!(cfg.ascent.runs, 10);
        assert_eq!(cfg.gan.top_k, 3);
        assert_eq!(
            cfg.environment,
            EnvSpec::Synthetic {
                function: HFunction::H2,
                arms: 100,
                dim: 4,
                noise: 1.0
            }
        );
    }

    #[test]
    fn unknown_keys_rejected() {
        for bad in [
            r#"{"environment": {"kind": "continuum"}, "policy": "random", "extra": 1}"#,
            r#"{"environment": {"kind": "continuum", "grid": 10, "oops": 1}, "policy": "random"}"#,
            r#"{"environment": {"kind": "continuum"}, "policy": "random", "train": {"iters": 3}}"#,
        ] {
            assert!(ExperimentConfig::from_json(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn serde_roundtrip() {
        let cfg = ExperimentConfig::new(EnvSpec::Continuum { grid: 1000, noise: 0.0 }, PolicyName::GanTs);
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);
    }

    #[test]
    fn policy_names_roundtrip() {
        for p in PolicyName::ALL {
            assert_eq!(PolicyName::parse(p.as_str()).unwrap(), p);
        }
    }
}
