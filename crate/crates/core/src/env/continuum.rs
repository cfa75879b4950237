use rand_distr::{Distribution, Normal};

use super::{check_arm, Environment, RewardKind};
use crate::ann::ArmSet;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream, StreamRng};

/// `0.5·(sin(13x)·sin(27x) + 1)` on `[0, 1]`.
pub fn continuum_reward(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Contract(format!("continuum action {x} outside [0, 1]")));
    }
    Ok(0.5 * ((13.0 * x).sin() * (27.0 * x).sin() + 1.0))
}

const SCAN_POINTS: usize = 1_000_000;

/// One-dimensional action space `[0, 1]` with a constant context `[1]`. The
/// discretized grid serves baselines that need a finite arm set.
#[derive(Debug, Clone)]
pub struct ContinuumEnv {
    grid: ArmSet,
    noise: f64,
    noise_rng: StreamRng,
    optimum: f64,
}

impl ContinuumEnv {
    pub fn new(grid_size: usize, noise: f64, seed: u64) -> Result<Self> {
        if grid_size < 2 {
            return Err(Error::Config("continuum grid needs at least 2 points".into()));
        }
        if !(noise >= 0.0 && noise.is_finite()) {
            return Err(Error::Config(format!("noise must be >= 0, got {noise}")));
        }
        let points = (0..grid_size).map(|i| i as f64 / (grid_size - 1) as f64).collect();
        Ok(Self {
            grid: ArmSet::from_rows(1, points)?,
            noise,
            noise_rng: stream_rng(seed, Stream::Environment, 2),
            optimum: Self::scan_optimum().1,
        })
    }

    /// Location and value of the maximum over a uniform scan of `[0, 1]`.
    pub fn scan_optimum() -> (f64, f64) {
        (0..=SCAN_POINTS)
            .map(|i| {
                let x = i as f64 / SCAN_POINTS as f64;
                (x, 0.5 * ((13.0 * x).sin() * (27.0 * x).sin() + 1.0))
            })
            .fold((0.0, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b })
    }

    fn noisy(&mut self, mean: f64) -> Result<f64> {
        if self.noise == 0.0 {
            return Ok(mean);
        }
        let n = Normal::new(0.0, self.noise).map_err(|e| Error::Config(e.to_string()))?;
        Ok(mean + n.sample(&mut self.noise_rng))
    }
}

impl Environment for ContinuumEnv {
    fn context_dim(&self) -> usize {
        1
    }

    fn arms(&self) -> &ArmSet {
        &self.grid
    }

    fn reward_kind(&self) -> RewardKind {
        RewardKind::Real
    }

    fn next_context(&mut self) -> Result<Vec<f64>> {
        Ok(vec![1.0])
    }

    fn reward(&mut self, arm: usize) -> Result<f64> {
        let mean = self.expected_reward(arm)?;
        self.noisy(mean)
    }

    fn expected_reward(&self, arm: usize) -> Result<f64> {
        check_arm(arm, self.grid.len())?;
        continuum_reward(self.grid.row(arm)[0])
    }

    fn optimal_value(&self) -> Result<f64> {
        Ok(self.optimum)
    }

    fn reward_at(&mut self, action: &[f64]) -> Result<f64> {
        let x = *action
            .first()
            .ok_or_else(|| Error::Contract("empty continuum action".into()))?;
        let mean = continuum_reward(x)?;
        self.noisy(mean)
    }

    fn expected_reward_at(&self, action: &[f64]) -> Result<f64> {
        let x = *action
            .first()
            .ok_or_else(|| Error::Contract("empty continuum action".into()))?;
        continuum_reward(x)
    }

    fn nearest_arm(&self, action: &[f64]) -> Result<usize> {
        let x = action.first().copied().unwrap_or(0.0).clamp(0.0, 1.0);
        Ok((x * (self.grid.len() - 1) as f64).round() as usize)
    }

    fn is_continuum(&self) -> bool {
        true
    }
}
