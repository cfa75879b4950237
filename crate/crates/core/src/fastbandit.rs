//! Multistart gradient ascent over arm embeddings through a frozen reward
//! model, snapped to real arms by nearest-neighbor search.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::ann::{normalize, ArmIndex};
use crate::error::{Error, Result};
use crate::policy::ArmScorer;
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartDomain {
    UnitSphere,
    /// Uniform over `[-1, 1]^d`.
    Box,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AscentConfig {
    pub runs: usize,
    pub iterations: usize,
    /// Step-size parameter `s` in `alpha_i = s / (s + i)`.
    pub step: f64,
    /// Stop a run once its value exceeds this. `None` never stops early.
    pub stop_threshold: Option<f64>,
    pub start: StartDomain,
    /// Re-project iterates onto the unit sphere after each step.
    pub project: bool,
    /// Neighbors scored per run after snapping.
    pub k_snap: usize,
}

impl Default for AscentConfig {
    fn default() -> Self {
        Self {
            runs: 10,
            iterations: 30,
            step: 1.0,
            stop_threshold: None,
            start: StartDomain::UnitSphere,
            project: false,
            k_snap: 1,
        }
    }
}

impl AscentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 || self.iterations == 0 {
            return Err(Error::Config(format!(
                "ascent needs runs >= 1 and iterations >= 1, got R={} I={}",
                self.runs, self.iterations
            )));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::Config(format!("ascent step must be positive, got {}", self.step)));
        }
        if let Some(tau) = self.stop_threshold {
            if !(tau > 0.0 && tau <= 1.0) {
                return Err(Error::Config(format!("stop threshold must lie in (0, 1], got {tau}")));
            }
        }
        if self.k_snap == 0 {
            return Err(Error::Config("k_snap must be >= 1".into()));
        }
        Ok(())
    }

    /// `alpha_i` for iteration `i >= 1`.
    pub fn step_size(&self, i: usize) -> f64 {
        self.step / (self.step + i as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AscentResult {
    pub best_embedding: Vec<f64>,
    pub best_value: f64,
    /// Final iterate of every run that finished, in run order.
    pub finals: Vec<Vec<f64>>,
    pub failed_runs: usize,
}

fn start_point<R: Rng + ?Sized>(dim: usize, domain: StartDomain, rng: &mut R) -> Vec<f64> {
    match domain {
        StartDomain::Box => (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect(),
        StartDomain::UnitSphere => loop {
            let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
            if normalize(&mut v) {
                break v;
            }
        },
    }
}

fn one_run<F>(objective: &mut F, x0: Vec<f64>, cfg: &AscentConfig) -> Result<Option<(Vec<f64>, f64)>>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let mut x = x0;
    let (mut value, mut grad) = objective(&x)?;
    for i in 1..=cfg.iterations {
        if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Ok(None);
        }
        let alpha = cfg.step_size(i);
        x.iter_mut().zip(&grad).for_each(|(xi, g)| *xi += alpha * g);
        if cfg.project {
            normalize(&mut x);
        }
        (value, grad) = objective(&x)?;
        if cfg.stop_threshold.is_some_and(|tau| value > tau) {
            break;
        }
    }
    Ok(value.is_finite().then_some((x, value)))
}

/// Runs `cfg.runs` independent ascents of `objective` from random starts and
/// returns the best final iterate. Run `r` draws its start from its own seed
/// stream, so the runs of a smaller `R` are a prefix of a larger one.
pub fn multistart_ascent<F>(dim: usize, mut objective: F, cfg: &AscentConfig, seed: u64) -> Result<AscentResult>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    cfg.validate()?;
    if dim == 0 {
        return Err(Error::Contract("ascent over a zero-dimensional space".into()));
    }
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut finals = Vec::with_capacity(cfg.runs);
    let mut failed_runs = 0;
    for r in 0..cfg.runs {
        let mut rng = stream_rng(seed, Stream::Ascent, r as u64);
        let x0 = start_point(dim, cfg.start, &mut rng);
        match one_run(&mut objective, x0, cfg)? {
            None => failed_runs += 1,
            Some((x, v)) => {
                if best.as_ref().is_none_or(|(_, bv)| v > *bv) {
                    best = Some((x.clone(), v));
                }
                finals.push(x);
            }
        }
    }
    let (best_embedding, best_value) =
        best.ok_or_else(|| Error::Numerical(format!("all {} ascent runs diverged", cfg.runs)))?;
    Ok(AscentResult {
        best_embedding,
        best_value,
        finals,
        failed_runs,
    })
}

/// A chosen real arm and its policy score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    pub arm_id: u64,
    pub score: f64,
}

/// Scores the given arm ids and keeps the best, ties to the lower id.
pub(crate) fn best_of(
    scorer: &dyn ArmScorer,
    context: &[f64],
    index: &ArmIndex,
    ids: &mut Vec<u64>,
) -> Result<Selection> {
    ids.sort_unstable();
    ids.dedup();
    let mut best: Option<Selection> = None;
    for &id in ids.iter() {
        let arm = index.vector(id).ok_or(Error::InvalidArm(id as usize))?;
        let score = scorer.score(context, arm)?;
        if best.is_none_or(|b| score > b.score) {
            best = Some(Selection { arm_id: id, score });
        }
    }
    best.ok_or(Error::EmptyIndex)
}

/// Ascends the policy objective from `cfg.runs` starts, snaps every run's
/// final embedding to its `k_snap` nearest arms, and returns the best real arm
/// under the same objective.
pub fn select_arm_fast(
    scorer: &dyn ArmScorer,
    context: &[f64],
    index: &ArmIndex,
    cfg: &AscentConfig,
    seed: u64,
) -> Result<Selection> {
    if index.is_empty() {
        return Err(Error::EmptyIndex);
    }
    let ascent = multistart_ascent(
        index.dim(),
        |a: &[f64]| scorer.score_with_arm_grad(context, a),
        cfg,
        seed,
    )?;
    let queries: Vec<f64> = ascent.finals.concat();
    let mut ids: Vec<u64> = index
        .query_batch(&queries, cfg.k_snap)?
        .into_iter()
        .flatten()
        .map(|n| n.id)
        .collect();
    best_of(scorer, context, index, &mut ids)
}
