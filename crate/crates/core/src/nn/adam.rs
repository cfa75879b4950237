use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            weight_decay: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam with decoupled weight decay over a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    config: AdamConfig,
    first: Vec<f64>,
    second: Vec<f64>,
    step: u64,
}

impl AdamState {
    pub fn new(param_count: usize, config: AdamConfig) -> Self {
        Self {
            config,
            first: vec![0.0; param_count],
            second: vec![0.0; param_count],
            step: 0,
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update in place. Weight decay shrinks the parameters before the
    /// moment update; NaN/inf gradients are rejected without touching state.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        check_dim("adam parameters", self.first.len(), params.len())?;
        check_dim("adam gradients", self.first.len(), grads.len())?;
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::Training(format!(
                "non-finite gradient at parameter {i}"
            )));
        }
        let AdamConfig {
            learning_rate: lr,
            weight_decay,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        let decay = 1.0 - lr * weight_decay;
        for i in 0..params.len() {
            params[i] *= decay;
            let g = grads[i];
            self.first[i] = beta1 * self.first[i] + (1.0 - beta1) * g;
            self.second[i] = beta2 * self.second[i] + (1.0 - beta2) * g * g;
            let m_hat = self.first[i] / bc1;
            let v_hat = self.second[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + epsilon);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_without_decay_is_identity() {
        let cfg = AdamConfig {
            weight_decay: 0.0,
            ..AdamConfig::default()
        };
        let mut state = AdamState::new(3, cfg);
        let mut p = vec![1.0, -2.0, 0.5];
        state.step(&mut p, &[0.0; 3]).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
        let cfg = AdamConfig {
            weight_decay: 0.0,
            ..AdamConfig::default()
        };
        let mut state = AdamState::new(2, cfg);
        let mut p = vec![0.0, 0.0];
        state.step(&mut p, &[3.0, -0.5]).unwrap();
        let expect0 = -1e-3 * 3.0 / (3.0 + 1e-8);
        let expect1 = 1e-3 * 0.5 / (0.5 + 1e-8);
        assert!((p[0] - expect0).abs() < 1e-18);
        assert!((p[1] - expect1).abs() < 1e-18);
    }

    #[test]
    fn deterministic() {
        let mut a = AdamState::new(2, AdamConfig::default());
        let mut b = a.clone();
        let mut pa = vec![0.3, 0.4];
        let mut pb = pa.clone();
        a.step(&mut pa, &[0.1, -0.2]).unwrap();
        b.step(&mut pb, &[0.1, -0.2]).unwrap();
        assert_eq!(pa.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
                   pb.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        assert_eq!(a, b);
    }

    #[test]
    fn nan_gradient_is_a_training_error() {
        let mut s = AdamState::new(2, AdamConfig::default());
        let mut p = vec![0.0, 0.0];
        assert!(matches!(s.step(&mut p, &[f64::NAN, 0.0]), Err(Error::Training(_))));
        assert_eq!(s.step_count(), 0);
    }

    #[test]
    fn weight_decay_shrinks() {
        let cfg = AdamConfig {
            learning_rate: 0.1,
            weight_decay: 0.5,
            ..AdamConfig::default()
        };
        let mut s = AdamState::new(1, cfg);
        let mut p = vec![2.0];
        s.step(&mut p, &[0.0]).unwrap();
        assert!((p[0] - 2.0 * 0.95).abs() < 1e-15);
    }
}
