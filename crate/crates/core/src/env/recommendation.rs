//! Rating-style recommendation: users are contexts, items are arms, and a
//! rating `r ∈ {0.5, 1.0, ..., 5.0}` pays 1 with probability `0.2·r`.
//!
//! Ratings come from a synthetic latent-factor model: user and item factors
//! are unit vectors and the rating is `0.5 + 4.5·(1 + uᵀv)/2` rounded to the
//! nearest half star.

use rand::Rng;

use super::{check_arm, Environment, RewardKind};
use crate::ann::{random_unit_vectors, ArmSet};
use crate::error::{Error, Result};
use crate::rng::{child_seed, stream_rng, Stream, StreamRng};

/// `P(r = 1)` for a half-star rating.
pub fn rating_probability(rating: f64) -> Result<f64> {
    let halves = rating * 2.0;
    if !(1.0..=10.0).contains(&halves) || halves.fract() != 0.0 {
        return Err(Error::Contract(format!("rating {rating} is not a half star in [0.5, 5]")));
    }
    Ok(rating * 0.2)
}

#[derive(Debug, Clone)]
pub struct RecommendationEnv {
    users: Vec<f64>,
    dim: usize,
    items: ArmSet,
    contexts: StreamRng,
    clicks: StreamRng,
    current: Option<usize>,
}

impl RecommendationEnv {
    pub fn new(num_users: usize, num_items: usize, dim: usize, seed: u64) -> Result<Self> {
        if num_users == 0 || num_items == 0 || dim == 0 {
            return Err(Error::Config("recommendation environment needs users, items and dim >= 1".into()));
        }
        Ok(Self {
            users: random_unit_vectors(num_users, dim, child_seed(seed, Stream::Environment, 0)),
            dim,
            items: ArmSet::from_rows(dim, random_unit_vectors(num_items, dim, child_seed(seed, Stream::Environment, 3)))?,
            contexts: stream_rng(seed, Stream::Environment, 1),
            clicks: stream_rng(seed, Stream::Environment, 2),
            current: None,
        })
    }

    pub fn rating(&self, user: usize, item: usize) -> f64 {
        let u = &self.users[user * self.dim..(user + 1) * self.dim];
        let cos: f64 = u.iter().zip(self.items.row(item)).map(|(a, b)| a * b).sum();
        let raw = 0.5 + 4.5 * (1.0 + cos.clamp(-1.0, 1.0)) / 2.0;
        ((raw * 2.0).round() / 2.0).clamp(0.5, 5.0)
    }

    fn user(&self) -> Result<usize> {
        self.current
            .ok_or_else(|| Error::Contract("no current context; call next_context first".into()))
    }
}

impl Environment for RecommendationEnv {
    fn context_dim(&self) -> usize {
        self.dim
    }

    fn arms(&self) -> &ArmSet {
        &self.items
    }

    fn reward_kind(&self) -> RewardKind {
        RewardKind::Binary
    }

    fn next_context(&mut self) -> Result<Vec<f64>> {
        let n = self.users.len() / self.dim;
        let u = self.contexts.random_range(0..n);
        self.current = Some(u);
        Ok(self.users[u * self.dim..(u + 1) * self.dim].to_vec())
    }

    fn reward(&mut self, arm: usize) -> Result<f64> {
        let p = self.expected_reward(arm)?;
        Ok(if self.clicks.random::<f64>() < p { 1.0 } else { 0.0 })
    }

    fn expected_reward(&self, arm: usize) -> Result<f64> {
        check_arm(arm, self.items.len())?;
        rating_probability(self.rating(self.user()?, arm))
    }
}
