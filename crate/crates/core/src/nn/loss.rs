use crate::error::{Error, Result};

pub const PROB_EPSILON: f64 = 1e-7;

/// Binary cross-entropy with the prediction clamped into `[ε, 1-ε]`.
/// Returns `(loss, dloss/dprediction)`; the derivative is zero where the
/// clamp is active.
pub fn bce_loss(prediction: f64, label: f64) -> Result<(f64, f64)> {
    if label != 0.0 && label != 1.0 {
        return Err(Error::Contract(format!(
            "binary label must be 0 or 1, got {label}"
        )));
    }
    if !prediction.is_finite() {
        return Err(Error::Numerical(format!("prediction {prediction}")));
    }
    let clamped = prediction.clamp(PROB_EPSILON, 1.0 - PROB_EPSILON);
    let loss = -(label * clamped.ln() + (1.0 - label) * (1.0 - clamped).ln());
    let grad = if clamped != prediction {
        0.0
    } else {
        -label / clamped + (1.0 - label) / (1.0 - clamped)
    };
    Ok((loss, grad))
}

/// Squared error for regression-head reward models.
pub fn squared_loss(prediction: f64, target: f64) -> Result<(f64, f64)> {
    if !prediction.is_finite() || !target.is_finite() {
        return Err(Error::Numerical(format!(
            "squared loss on prediction {prediction}, target {target}"
        )));
    }
    let diff = prediction - target;
    Ok((diff * diff, 2.0 * diff))
}
