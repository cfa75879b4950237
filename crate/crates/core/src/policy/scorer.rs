use crate::error::Result;

/// Reward-model input layout: context followed by the arm embedding.
pub fn joint_input(context: &[f64], arm: &[f64]) -> Vec<f64> {
    let mut x = Vec::with_capacity(context.len() + arm.len());
    x.extend_from_slice(context);
    x.extend_from_slice(arm);
    x
}

/// A policy objective over arm embeddings for a fixed context.
///
/// Implementations are read-only views over a published snapshot; the
/// selection routines (exhaustive, multistart ascent, generator snap) only
/// depend on this trait.
pub trait ArmScorer {
    fn score(&self, context: &[f64], arm: &[f64]) -> Result<f64>;

    /// Score and its gradient with respect to the arm embedding.
    fn score_with_arm_grad(&self, context: &[f64], arm: &[f64]) -> Result<(f64, Vec<f64>)>;

    /// Whether scores are probabilities in (0, 1).
    fn is_probability(&self) -> bool {
        false
    }

    /// Scores of `arms` (row-major, `arm_dim` columns) under one context.
    fn score_many(&self, context: &[f64], arms: &[f64], arm_dim: usize) -> Result<Vec<f64>> {
        arms.chunks(arm_dim).map(|a| self.score(context, a)).collect()
    }
}
