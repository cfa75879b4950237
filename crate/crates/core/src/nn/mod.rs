//! Neural building blocks: the reward/generator network, dropout masks,
//! losses, the optimizer, and the on-disk container.

mod adam;
mod dropout;
pub mod io;
mod loss;
mod mlp;

pub use adam::{AdamConfig, AdamState};
pub use dropout::{sample_mask, DropoutMask};
pub use loss::{bce_loss, squared_loss, PROB_EPSILON};
pub use mlp::{sigmoid, DenseLayer, ForwardCache, MlpModel, OutputHead, ParamGradient, DEFAULT_LEAKY_SLOPE};
