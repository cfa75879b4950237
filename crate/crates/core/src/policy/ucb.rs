use super::scorer::{joint_input, ArmScorer};
use crate::error::{check_dim, Error, Result};
use crate::nn::io::{read_f64, read_f64s, read_u64, PayloadWriter, Section};
use crate::nn::{MlpModel, ParamGradient};

pub const ZCOV_TAG: &[u8; 4] = b"ZCOV";

/// Central-difference step for the UCB objective's arm gradient.
pub const UCB_FD_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovarianceMode {
    Dense,
    Diagonal,
}

#[derive(Debug, Clone, PartialEq)]
enum Matrix {
    /// `Z` and `Z^-1`, both p x p row-major.
    Dense { z: Vec<f64>, z_inv: Vec<f64> },
    Diagonal { z: Vec<f64> },
}

/// Gradient-feature covariance `Z = λI + Σ g gᵀ / m` for the NeuralUCB bonus
/// `γ·sqrt(gᵀ Z⁻¹ g / m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceState {
    matrix: Matrix,
    p: usize,
    lambda: f64,
    gamma: f64,
    width: usize,
}

impl CovarianceState {
    pub fn new(mode: CovarianceMode, p: usize, lambda: f64, gamma: f64, width: usize) -> Result<Self> {
        if lambda <= 0.0 || !lambda.is_finite() {
            return Err(Error::Contract(format!("ridge λ must be positive, got {lambda}")));
        }
        if gamma < 0.0 || !gamma.is_finite() {
            return Err(Error::Contract(format!("γ must be non-negative, got {gamma}")));
        }
        if width == 0 || p == 0 {
            return Err(Error::Contract("covariance needs p > 0 and m > 0".into()));
        }
        let matrix = match mode {
            CovarianceMode::Dense => {
                let mut z = vec![0.0; p * p];
                let mut z_inv = vec![0.0; p * p];
                for i in 0..p {
                    z[i * p + i] = lambda;
                    z_inv[i * p + i] = 1.0 / lambda;
                }
                Matrix::Dense { z, z_inv }
            }
            CovarianceMode::Diagonal => Matrix::Diagonal { z: vec![lambda; p] },
        };
        Ok(Self {
            matrix,
            p,
            lambda,
            gamma,
            width,
        })
    }

    /// Sized for `model`'s parameter count and width.
    pub fn for_model(model: &MlpModel, mode: CovarianceMode, lambda: f64, gamma: f64) -> Result<Self> {
        Self::new(mode, model.param_count(), lambda, gamma, model.width())
    }

    pub fn mode(&self) -> CovarianceMode {
        match self.matrix {
            Matrix::Dense { .. } => CovarianceMode::Dense,
            Matrix::Diagonal { .. } => CovarianceMode::Diagonal,
        }
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    /// `Z` as a dense row-major matrix.
    pub fn z_dense(&self) -> Vec<f64> {
        match &self.matrix {
            Matrix::Dense { z, .. } => z.clone(),
            Matrix::Diagonal { z } => {
                let mut out = vec![0.0; self.p * self.p];
                for (i, v) in z.iter().enumerate() {
                    out[i * self.p + i] = *v;
                }
                out
            }
        }
    }

    /// Diagonal of `Z`.
    pub fn z_diagonal(&self) -> Vec<f64> {
        match &self.matrix {
            Matrix::Dense { z, .. } => (0..self.p).map(|i| z[i * self.p + i]).collect(),
            Matrix::Diagonal { z } => z.clone(),
        }
    }

    /// The maintained inverse (dense mode only).
    pub fn z_inverse(&self) -> Option<&[f64]> {
        match &self.matrix {
            Matrix::Dense { z_inv, .. } => Some(z_inv),
            Matrix::Diagonal { .. } => None,
        }
    }

    /// `gᵀ Z⁻¹ g`.
    pub fn quadratic_form(&self, g: &[f64]) -> Result<f64> {
        check_dim("covariance feature", self.p, g.len())?;
        let q = match &self.matrix {
            Matrix::Dense { z_inv, .. } => {
                let p = self.p;
                let mut acc = 0.0;
                for i in 0..p {
                    let row = &z_inv[i * p..(i + 1) * p];
                    let mut s = 0.0;
                    for (a, b) in row.iter().zip(g) {
                        s += a * b;
                    }
                    acc += g[i] * s;
                }
                acc
            }
            Matrix::Diagonal { z } => g.iter().zip(z).map(|(gi, zi)| gi * gi / zi).sum(),
        };
        if !q.is_finite() || q < -1e-9 {
            return Err(Error::Numerical(format!("covariance quadratic form {q}")));
        }
        Ok(q.max(0.0))
    }

    /// Confidence bonus `γ·sqrt(gᵀ Z⁻¹ g / m)`.
    pub fn bonus(&self, g: &[f64]) -> Result<f64> {
        Ok(self.gamma * (self.quadratic_form(g)? / self.width as f64).sqrt())
    }

    /// Rank-one update with feature `g`; dense mode keeps `Z⁻¹` current by
    /// Sherman-Morrison.
    pub fn update(&mut self, g: &[f64]) -> Result<()> {
        check_dim("covariance feature", self.p, g.len())?;
        if !g.iter().all(|v| v.is_finite()) {
            return Err(Error::Numerical("non-finite covariance feature".into()));
        }
        let m = self.width as f64;
        let p = self.p;
        match &mut self.matrix {
            Matrix::Diagonal { z } => {
                for (zi, gi) in z.iter_mut().zip(g) {
                    *zi += gi * gi / m;
                }
            }
            Matrix::Dense { z, z_inv } => {
                if g.iter().all(|&v| v == 0.0) {
                    return Ok(());
                }
                let scale = 1.0 / m.sqrt();
                let u: Vec<f64> = g.iter().map(|v| v * scale).collect();
                for i in 0..p {
                    for j in 0..p {
                        z[i * p + j] += u[i] * u[j];
                    }
                }
                // w = Z^-1 u
                let w: Vec<f64> = (0..p)
                    .map(|i| z_inv[i * p..(i + 1) * p].iter().zip(&u).map(|(a, b)| a * b).sum())
                    .collect();
                let denom = 1.0 + u.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
                if denom <= 0.0 || !denom.is_finite() {
                    return Err(Error::Numerical(format!("Sherman-Morrison denominator {denom}")));
                }
                for i in 0..p {
                    for j in 0..p {
                        z_inv[i * p + j] -= w[i] * w[j] / denom;
                    }
                }
                // keep the inverse exactly symmetric
                for i in 0..p {
                    for j in (i + 1)..p {
                        let avg = 0.5 * (z_inv[i * p + j] + z_inv[j * p + i]);
                        z_inv[i * p + j] = avg;
                        z_inv[j * p + i] = avg;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_section(&self) -> Section {
        let mut w = PayloadWriter::default();
        w.u8(match self.mode() {
            CovarianceMode::Dense => 0,
            CovarianceMode::Diagonal => 1,
        })
        .u64(self.p as u64)
        .u64(self.width as u64)
        .f64(self.lambda)
        .f64(self.gamma);
        match &self.matrix {
            Matrix::Dense { z, z_inv } => {
                w.f64s(z).f64s(z_inv);
            }
            Matrix::Diagonal { z } => {
                w.f64s(z);
            }
        }
        w.finish(ZCOV_TAG)
    }

    pub fn from_section(section: &Section) -> Result<Self> {
        if &section.tag != ZCOV_TAG {
            return Err(Error::Format("not a ZCOV section".into()));
        }
        let r = &mut section.payload.as_slice();
        let mode = section
            .payload
            .first()
            .copied()
            .ok_or_else(|| Error::Format("empty ZCOV section".into()))?;
        *r = &r[1..];
        let p = read_u64(r)? as usize;
        let width = read_u64(r)? as usize;
        let lambda = read_f64(r)?;
        let gamma = read_f64(r)?;
        let expected = match mode {
            0 => 2 * p * p,
            1 => p,
            other => return Err(Error::Format(format!("unknown covariance mode {other}"))),
        };
        if r.len() != expected * 8 {
            return Err(Error::Format("ZCOV payload length mismatch".into()));
        }
        let matrix = if mode == 0 {
            let z = read_f64s(r, p * p)?;
            let z_inv = read_f64s(r, p * p)?;
            Matrix::Dense { z, z_inv }
        } else {
            Matrix::Diagonal { z: read_f64s(r, p)? }
        };
        Ok(Self {
            matrix,
            p,
            lambda,
            gamma,
            width,
        })
    }
}

/// Applies one observed gradient feature to the covariance.
pub fn ucb_update(cov: &mut CovarianceState, g: &ParamGradient) -> Result<()> {
    cov.update(&g.values)
}

/// NeuralUCB objective `f(x;θ) + γ·sqrt(gᵀ Z⁻¹ g / m)` over one snapshot.
#[derive(Debug, Clone, Copy)]
pub struct UcbScorer<'a> {
    model: &'a MlpModel,
    cov: &'a CovarianceState,
}

impl<'a> UcbScorer<'a> {
    pub fn new(model: &'a MlpModel, cov: &'a CovarianceState) -> Result<Self> {
        check_dim("covariance size", model.param_count(), cov.dim())?;
        Ok(Self { model, cov })
    }

    pub fn model(&self) -> &'a MlpModel {
        self.model
    }

    /// Mean estimate and bonus separately.
    pub fn components(&self, context: &[f64], arm: &[f64]) -> Result<(f64, f64)> {
        check_dim("context + arm", self.model.input_dim(), context.len() + arm.len())?;
        let cache = self.model.forward(&joint_input(context, arm), None)?;
        let value = cache.value();
        if self.cov.gamma() == 0.0 {
            return Ok((value, 0.0));
        }
        let g = self.model.backward_params(&cache, &[1.0])?;
        Ok((value, self.cov.bonus(&g.values)?))
    }
}

impl ArmScorer for UcbScorer<'_> {
    fn score(&self, context: &[f64], arm: &[f64]) -> Result<f64> {
        let (f, b) = self.components(context, arm)?;
        Ok(f + b)
    }

    /// The bonus depends on second derivatives of the network, so the arm
    /// gradient is taken by central differences on the whole objective.
    fn score_with_arm_grad(&self, context: &[f64], arm: &[f64]) -> Result<(f64, Vec<f64>)> {
        let value = self.score(context, arm)?;
        let mut probe = arm.to_vec();
        let mut grad = Vec::with_capacity(arm.len());
        for i in 0..arm.len() {
            let orig = probe[i];
            probe[i] = orig + UCB_FD_STEP;
            let up = self.score(context, &probe)?;
            probe[i] = orig - UCB_FD_STEP;
            let down = self.score(context, &probe)?;
            probe[i] = orig;
            grad.push((up - down) / (2.0 * UCB_FD_STEP));
        }
        Ok((value, grad))
    }
}
