//! Arm-scoring policies over a reward network: Thompson Sampling through a
//! frozen dropout mask, NeuralUCB with a gradient-feature covariance, and the
//! periodic batch retraining that produces new model snapshots.

mod scorer;
mod thompson;
mod train;
mod ucb;

pub use scorer::{joint_input, ArmScorer};
pub use thompson::{ts_draw, SampledModel};
pub use train::{dataset_loss, reward_model_step, train_reward_model, HistoryTriplet, RewardLoss, TrainConfig, TrainReport};
pub use ucb::{ucb_update, CovarianceMode, CovarianceState, UcbScorer, UCB_FD_STEP};
