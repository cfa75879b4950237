//! Neural contextual bandits over large arm sets.
//!
//! Arms live in a continuous embedding space next to a learned reward model.
//! Instead of scoring every arm, selection runs gradient ascent on the
//! embedding (or samples a trained generator) and snaps the result to real
//! arms through an HNSW index.

pub mod ann;
pub mod env;
pub mod error;
pub mod fastbandit;
pub mod gan;
pub mod harness;
pub mod nn;
pub mod policy;
pub mod rng;

pub use error::{Error, Result};
