use rand::Rng;
use serde::{Deserialize, Serialize};

use super::scorer::joint_input;
use crate::error::{Error, Result};
use crate::nn::{bce_loss, sample_mask, squared_loss, AdamState, MlpModel, OutputHead};

/// One observation `(context, arm embedding, reward)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryTriplet {
    pub context: Vec<f64>,
    pub arm: Vec<f64>,
    pub reward: f64,
}

impl HistoryTriplet {
    pub fn new(context: Vec<f64>, arm: Vec<f64>, reward: f64) -> Result<Self> {
        if !context.iter().chain(&arm).all(|v| v.is_finite()) || !reward.is_finite() {
            return Err(Error::Contract("history triplet with non-finite entry".into()));
        }
        Ok(Self {
            context,
            arm,
            reward,
        })
    }

    pub fn input(&self) -> Vec<f64> {
        joint_input(&self.context, &self.arm)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardLoss {
    /// Binary cross-entropy on a sigmoid head; rewards must be 0 or 1.
    Bce,
    /// Squared error on an identity head.
    Squared,
}

impl RewardLoss {
    pub fn head(self) -> OutputHead {
        match self {
            RewardLoss::Bce => OutputHead::Sigmoid,
            RewardLoss::Squared => OutputHead::Identity,
        }
    }

    /// The loss paired with a reward-model head.
    pub fn for_head(head: OutputHead) -> Self {
        match head {
            OutputHead::Sigmoid => RewardLoss::Bce,
            OutputHead::Identity => RewardLoss::Squared,
        }
    }

    pub fn eval(self, prediction: f64, target: f64) -> Result<(f64, f64)> {
        match self {
            RewardLoss::Bce => bce_loss(prediction, target),
            RewardLoss::Squared => squared_loss(prediction, target),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub iterations: usize,
    pub minibatch: usize,
    pub dropout: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 1000,
            minibatch: 64,
            dropout: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub initial_loss: f64,
    pub final_loss: f64,
    pub iterations: usize,
}

/// The training loss is fixed by the head: BCE for sigmoid, squared error for
/// identity.
fn loss_for(model: &MlpModel) -> Result<RewardLoss> {
    if model.output_dim() != 1 {
        return Err(Error::Contract(format!(
            "reward model needs one output, has {}",
            model.output_dim()
        )));
    }
    Ok(RewardLoss::for_head(model.head()))
}

/// Mean expectation-mode loss of `model` over `batch`.
pub fn dataset_loss(model: &MlpModel, batch: &[HistoryTriplet]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Contract("empty training batch".into()));
    }
    let loss = loss_for(model)?;
    let mut total = 0.0;
    for t in batch {
        let pred = model.predict_value(&t.input(), None)?;
        total += loss.eval(pred, t.reward)?.0;
    }
    Ok(total / batch.len() as f64)
}

/// One Adam step on a uniformly sampled minibatch, dropout active. Returns the
/// minibatch loss.
pub fn reward_model_step<R: Rng + ?Sized>(
    model: &mut MlpModel,
    batch: &[HistoryTriplet],
    adam: &mut AdamState,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Contract("empty training batch".into()));
    }
    let loss_fn = loss_for(model)?;
    let size = cfg.minibatch.max(1);
    let shapes = model.dropout_shapes();
    let mut grad = vec![0.0; model.param_count()];
    let mut total = 0.0;
    for _ in 0..size {
        let t = &batch[rng.random_range(0..batch.len())];
        let mask = sample_mask(cfg.dropout, &shapes, rng)?;
        let cache = model.forward(&t.input(), Some(&mask))?;
        let (loss, dloss) = loss_fn.eval(cache.value(), t.reward)?;
        total += loss;
        model.accumulate_param_grad(&cache, &[dloss / size as f64], &mut grad)?;
    }
    let mean = total / size as f64;
    if !mean.is_finite() {
        return Err(Error::Training(format!("loss diverged to {mean}")));
    }
    let mut params = model.params();
    adam.step(&mut params, &grad)?;
    model.set_params(&params).map_err(|e| Error::Training(e.to_string()))?;
    Ok(mean)
}

/// Minibatch Adam on the observed triplets. Returns a new snapshot; the input
/// model is left untouched.
pub fn train_reward_model<R: Rng + ?Sized>(
    model: &MlpModel,
    batch: &[HistoryTriplet],
    adam: &mut AdamState,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<(MlpModel, TrainReport)> {
    let initial_loss = dataset_loss(model, batch)?;
    let mut next = model.clone();
    for _ in 0..cfg.iterations {
        reward_model_step(&mut next, batch, adam, cfg, rng)?;
    }
    let final_loss = dataset_loss(&next, batch)?;
    if !final_loss.is_finite() {
        return Err(Error::Training(format!("final loss {final_loss}")));
    }
    Ok((
        next,
        TrainReport {
            initial_loss,
            final_loss,
            iterations: cfg.iterations,
        },
    ))
}
