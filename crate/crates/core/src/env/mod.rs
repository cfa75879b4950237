//! Reward environments. Each owns its arm set and a current context; the
//! agent sees contexts and observed rewards, the harness additionally reads
//! noiseless expectations and the per-context oracle for regret.

mod classification;
mod continuum;
mod recommendation;
mod synthetic;

use serde::{Deserialize, Serialize};

pub use classification::{load_sparse_dataset, write_sparse_dataset, ClassificationEnv, SparseDataset, SparseInstance};
pub use continuum::{continuum_reward, ContinuumEnv};
pub use recommendation::{rating_probability, RecommendationEnv};
pub use synthetic::{eval_h, HFunction, SyntheticEnv};

use crate::ann::ArmSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardKind {
    /// Rewards in {0, 1}; reward models use a sigmoid head.
    Binary,
    /// Real-valued rewards; reward models use an identity head.
    Real,
}

pub trait Environment {
    fn context_dim(&self) -> usize;

    fn arms(&self) -> &ArmSet;

    fn reward_kind(&self) -> RewardKind;

    /// Advances to the next round and returns its context.
    fn next_context(&mut self) -> Result<Vec<f64>>;

    /// Observed (possibly noisy) reward of arm `arm` (position in `arms()`)
    /// for the current context.
    fn reward(&mut self, arm: usize) -> Result<f64>;

    /// Noiseless expected reward of `arm` for the current context.
    fn expected_reward(&self, arm: usize) -> Result<f64>;

    /// Best arm position and its expected reward for the current context.
    fn best_arm(&self) -> Result<(usize, f64)> {
        let mut best = (0, f64::NEG_INFINITY);
        for i in 0..self.arms().len() {
            let v = self.expected_reward(i)?;
            if v > best.1 {
                best = (i, v);
            }
        }
        Ok(best)
    }

    /// Expected reward of the best action, over the full action space.
    fn optimal_value(&self) -> Result<f64> {
        self.best_arm().map(|(_, v)| v)
    }

    /// Observed reward of a free action, for continuous action spaces.
    fn reward_at(&mut self, _action: &[f64]) -> Result<f64> {
        Err(Error::Contract("environment has no continuous action space".into()))
    }

    /// Noiseless expected reward of a free action.
    fn expected_reward_at(&self, _action: &[f64]) -> Result<f64> {
        Err(Error::Contract("environment has no continuous action space".into()))
    }

    /// Grid arm nearest a free action, for logging.
    fn nearest_arm(&self, _action: &[f64]) -> Result<usize> {
        Err(Error::Contract("environment has no continuous action space".into()))
    }

    fn is_continuum(&self) -> bool {
        false
    }
}

pub(crate) fn check_arm(arm: usize, n: usize) -> Result<()> {
    if arm >= n {
        return Err(Error::InvalidArm(arm));
    }
    Ok(())
}
