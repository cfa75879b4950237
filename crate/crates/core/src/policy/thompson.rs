use rand::Rng;

use super::scorer::{joint_input, ArmScorer};
use crate::error::{check_dim, Result};
use crate::nn::{sample_mask, DropoutMask, MlpModel, OutputHead};

/// One approximate posterior sample: a model snapshot with a frozen dropout
/// mask. Scores are a deterministic function of `(context, arm)` for the
/// lifetime of the sample.
#[derive(Debug, Clone)]
pub struct SampledModel<'a> {
    model: &'a MlpModel,
    mask: DropoutMask,
}

/// Draws one mask set for the whole selection round.
pub fn ts_draw<'a, R: Rng + ?Sized>(model: &'a MlpModel, rate: f64, rng: &mut R) -> Result<SampledModel<'a>> {
    let mask = sample_mask(rate, &model.dropout_shapes(), rng)?;
    Ok(SampledModel { model, mask })
}

impl<'a> SampledModel<'a> {
    pub fn with_mask(model: &'a MlpModel, mask: DropoutMask) -> Self {
        Self { model, mask }
    }

    pub fn model(&self) -> &'a MlpModel {
        self.model
    }

    pub fn mask(&self) -> &DropoutMask {
        &self.mask
    }

    fn check(&self, context: &[f64], arm: &[f64]) -> Result<()> {
        check_dim("context + arm", self.model.input_dim(), context.len() + arm.len())
    }
}

impl ArmScorer for SampledModel<'_> {
    fn score(&self, context: &[f64], arm: &[f64]) -> Result<f64> {
        self.check(context, arm)?;
        self.model
            .predict_value(&joint_input(context, arm), Some(&self.mask))
    }

    fn score_with_arm_grad(&self, context: &[f64], arm: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check(context, arm)?;
        let cache = self.model.forward(&joint_input(context, arm), Some(&self.mask))?;
        let dx = self.model.backward_input(&cache, &[1.0])?;
        Ok((cache.value(), dx[context.len()..].to_vec()))
    }

    fn is_probability(&self) -> bool {
        self.model.head() == OutputHead::Sigmoid
    }

    fn score_many(&self, context: &[f64], arms: &[f64], arm_dim: usize) -> Result<Vec<f64>> {
        check_dim("context + arm", self.model.input_dim(), context.len() + arm_dim)?;
        let rows = arms.len() / arm_dim;
        let mut inputs = Vec::with_capacity(rows * self.model.input_dim());
        for a in arms.chunks(arm_dim) {
            inputs.extend_from_slice(context);
            inputs.extend_from_slice(a);
        }
        self.model.forward_batch(&inputs, Some(&self.mask))
    }
}
