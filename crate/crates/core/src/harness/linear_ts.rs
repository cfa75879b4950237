//! Bayesian ridge Thompson sampling over `φ(x, a) = concat(x, a)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::ann::ArmSet;
use crate::error::{check_dim, Error, Result};
use crate::policy::joint_input;

#[derive(Debug, Clone)]
pub struct LinearTsState {
    a: DMatrix<f64>,
    b: DVector<f64>,
    scale: f64,
}

impl LinearTsState {
    pub fn new(dim: usize, lambda: f64, scale: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::Contract(format!("LinearTS needs λ > 0, got {lambda}")));
        }
        Ok(Self {
            a: DMatrix::identity(dim, dim) * lambda,
            b: DVector::zeros(dim),
            scale,
        })
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// Posterior mean `A⁻¹b`.
    pub fn mean(&self) -> Result<DVector<f64>> {
        let chol = self
            .a
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Numerical("LinearTS matrix lost positive definiteness".into()))?;
        Ok(chol.solve(&self.b))
    }

    /// `θ̃ ~ N(A⁻¹b, v²A⁻¹)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<DVector<f64>> {
        let chol = self
            .a
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Numerical("LinearTS matrix lost positive definiteness".into()))?;
        let mut theta = chol.solve(&self.b);
        if self.scale > 0.0 {
            let xi = DVector::from_fn(self.dim(), |_, _| StandardNormal.sample(rng));
            // A = L Lᵀ, so L⁻ᵀ ξ has covariance A⁻¹.
            let noise = chol
                .l()
                .transpose()
                .solve_upper_triangular(&xi)
                .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
            theta += noise * self.scale;
        }
        Ok(theta)
    }

    /// Arm position maximizing `θ̃ᵀφ(x, a)`; ties go to the lower position.
    pub fn select<R: Rng + ?Sized>(&self, context: &[f64], arms: &ArmSet, rng: &mut R) -> Result<usize> {
        check_dim("LinearTS features", self.dim(), context.len() + arms.dim())?;
        let theta = self.sample(rng)?;
        let (tx, ta) = theta.as_slice().split_at(context.len());
        let base: f64 = tx.iter().zip(context).map(|(t, x)| t * x).sum();
        let mut best = (0, f64::NEG_INFINITY);
        for i in 0..arms.len() {
            let v = base + ta.iter().zip(arms.row(i)).map(|(t, a)| t * a).sum::<f64>();
            if v > best.1 {
                best = (i, v);
            }
        }
        Ok(best.0)
    }

    pub fn update(&mut self, context: &[f64], arm: &[f64], reward: f64) -> Result<()> {
        let phi = DVector::from_vec(joint_input(context, arm));
        check_dim("LinearTS features", self.dim(), phi.len())?;
        self.a.ger(1.0, &phi, &phi, 1.0);
        self.b.axpy(reward, &phi, 1.0);
        Ok(())
    }
}
