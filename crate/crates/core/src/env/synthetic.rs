use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{check_arm, Environment, RewardKind};
use crate::ann::{random_unit_vectors, ArmSet};
use crate::error::{check_dim, Error, Result};
use crate::rng::{child_seed, stream_rng, Stream, StreamRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HFunction {
    /// `(xᵀa)·cos(xᵀa) + 0.25·(xᵀa)`
    H1,
    /// `10·(xᵀa)²`
    H2,
    /// `cos(3·xᵀa)`
    H3,
}

impl HFunction {
    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            1 => Ok(HFunction::H1),
            2 => Ok(HFunction::H2),
            3 => Ok(HFunction::H3),
            _ => Err(Error::Config(format!("unknown synthetic function h{id}"))),
        }
    }
}

/// Noiseless synthetic reward.
pub fn eval_h(h: HFunction, x: &[f64], a: &[f64]) -> Result<f64> {
    check_dim("synthetic arm", x.len(), a.len())?;
    let u: f64 = x.iter().zip(a).map(|(p, q)| p * q).sum();
    Ok(match h {
        HFunction::H1 => u * u.cos() + 0.25 * u,
        HFunction::H2 => 10.0 * u * u,
        HFunction::H3 => (3.0 * u).cos(),
    })
}

/// Unit-norm arms and contexts, reward `h(x, a) + σ·ξ`.
#[derive(Debug, Clone)]
pub struct SyntheticEnv {
    h: HFunction,
    arms: ArmSet,
    noise: f64,
    contexts: StreamRng,
    noise_rng: StreamRng,
    current: Vec<f64>,
}

impl SyntheticEnv {
    pub fn new(h: HFunction, num_arms: usize, dim: usize, noise: f64, seed: u64) -> Result<Self> {
        if num_arms == 0 || dim == 0 {
            return Err(Error::Config("synthetic environment needs arms and dim >= 1".into()));
        }
        if !(noise >= 0.0 && noise.is_finite()) {
            return Err(Error::Config(format!("noise must be >= 0, got {noise}")));
        }
        let arms = random_unit_vectors(num_arms, dim, child_seed(seed, Stream::Environment, 0));
        Ok(Self {
            h,
            arms: ArmSet::from_rows(dim, arms)?,
            noise,
            contexts: stream_rng(seed, Stream::Environment, 1),
            noise_rng: stream_rng(seed, Stream::Environment, 2),
            current: Vec::new(),
        })
    }

    pub fn function(&self) -> HFunction {
        self.h
    }

    pub fn current_context(&self) -> &[f64] {
        &self.current
    }

    fn require_context(&self) -> Result<&[f64]> {
        if self.current.is_empty() {
            return Err(Error::Contract("no current context; call next_context first".into()));
        }
        Ok(&self.current)
    }
}

impl Environment for SyntheticEnv {
    fn context_dim(&self) -> usize {
        self.arms.dim()
    }

    fn arms(&self) -> &ArmSet {
        &self.arms
    }

    fn reward_kind(&self) -> RewardKind {
        RewardKind::Real
    }

    fn next_context(&mut self) -> Result<Vec<f64>> {
        let v = random_unit_vectors(1, self.arms.dim(), rand::Rng::random(&mut self.contexts));
        self.current = v.clone();
        Ok(v)
    }

    fn reward(&mut self, arm: usize) -> Result<f64> {
        let mean = self.expected_reward(arm)?;
        if self.noise == 0.0 {
            return Ok(mean);
        }
        let n = Normal::new(0.0, self.noise).map_err(|e| Error::Config(e.to_string()))?;
        Ok(mean + n.sample(&mut self.noise_rng))
    }

    fn expected_reward(&self, arm: usize) -> Result<f64> {
        check_arm(arm, self.arms.len())?;
        eval_h(self.h, self.require_context()?, self.arms.row(arm))
    }
}
