//! The parametric Hawkes model with an exponential kernel.
//!
//! The intensity of dimension `d` is
//! `lambda_d(t) = mu_d + sum_{t_j < t} a[d][d_j] * exp(-w (t - t_j))`.
//! Since the kernel integrates to `1 / w`, the branching matrix is `A / w`
//! and the process is stationary when its spectral radius is below one.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct HawkesModel {
    mu: Vec<f64>,
    infectivity: DMatrix<f64>,
    decay: f64,
}

/// Outcome of [`HawkesModel::validate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelValidation {
    pub spectral_radius: f64,
    pub stationary: bool,
}

impl HawkesModel {
    /// Build a model, checking shapes, signs and finiteness.
    pub fn new(mu: Vec<f64>, infectivity: DMatrix<f64>, decay: f64) -> Result<Self> {
        let dim = mu.len();
        if dim == 0 {
            return Err(Error::InvalidParameter("model dimension must be positive".into()));
        }
        if infectivity.nrows() != dim || infectivity.ncols() != dim {
            return Err(Error::DimensionMismatch(format!(
                "mu has length {dim} but A is {}x{}",
                infectivity.nrows(),
                infectivity.ncols()
            )));
        }
        if !(decay.is_finite() && decay > 0.0) {
            return Err(Error::InvalidParameter(format!("decay must be positive, got {decay}")));
        }
        if let Some(bad) = mu.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidParameter(format!("exogenous rate {bad} is not a nonnegative number")));
        }
        if let Some(bad) = infectivity.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidParameter(format!("infectivity {bad} is not a nonnegative number")));
        }
        Ok(Self { mu, infectivity, decay })
    }

    /// Build from a row-major nested vector, as found in model JSON files.
    pub fn from_rows(mu: Vec<f64>, rows: &[Vec<f64>], decay: f64) -> Result<Self> {
        let dim = mu.len();
        if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch(format!(
                "mu has length {dim} but A is not {dim}x{dim}"
            )));
        }
        let a = DMatrix::from_fn(dim, dim, |i, j| rows[i][j]);
        Self::new(mu, a, decay)
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn infectivity(&self) -> &DMatrix<f64> {
        &self.infectivity
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    /// Same infectivity and decay with different exogenous rates.
    pub fn with_mu(&self, mu: Vec<f64>) -> Result<Self> {
        Self::new(mu, self.infectivity.clone(), self.decay)
    }

    /// Expected number of direct offspring in dimension `d` of one event in `d'`.
    pub fn branching_matrix(&self) -> DMatrix<f64> {
        &self.infectivity / self.decay
    }

    pub fn validate(&self) -> ModelValidation {
        let spectral_radius = spectral_radius(&self.branching_matrix());
        ModelValidation { spectral_radius, stationary: spectral_radius < 1.0 }
    }

    pub fn is_stationary(&self) -> bool {
        self.validate().stationary
    }

    /// Long-run event rate per dimension, `(I - A/w)^{-1} mu`.
    pub fn stationary_rates(&self) -> Result<Vec<f64>> {
        let v = self.validate();
        if !v.stationary {
            return Err(Error::NonStationary { radius: v.spectral_radius });
        }
        let dim = self.dim();
        let m = DMatrix::identity(dim, dim) - self.branching_matrix();
        let mu = nalgebra::DVector::from_column_slice(&self.mu);
        let rates = m
            .lu()
            .solve(&mu)
            .ok_or_else(|| Error::Numerical("I - A/w is singular".into()))?;
        Ok(rates.iter().copied().collect())
    }

    /// Intensity of every dimension just after `history` (events strictly before `t`).
    pub fn intensity(&self, history: &[crate::sequence::Event], t: f64) -> Vec<f64> {
        let mut out = self.mu.clone();
        for e in history.iter().take_while(|e| e.t < t) {
            let k = (-self.decay * (t - e.t)).exp();
            for (d, o) in out.iter_mut().enumerate() {
                *o += self.infectivity[(d, e.dim)] * k;
            }
        }
        out
    }
}

/// Largest eigenvalue modulus of a square matrix.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    if m.iter().all(|v| *v == 0.0) {
        return 0.0;
    }
    if m.nrows() == 1 {
        return m[(0, 0)].abs();
    }
    match nalgebra::linalg::Schur::try_new(m.clone(), 1e-15, 10_000) {
        Some(schur) => schur
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max),
        None => gelfand_radius(m),
    }
}

// Fallback when the Schur iteration does not converge.
fn gelfand_radius(m: &DMatrix<f64>) -> f64 {
    let mut p = m.clone();
    let mut log_scale = 0.0;
    let mut k = 1.0;
    for _ in 0..10 {
        p = &p * &p;
        k *= 2.0;
        let n = p.norm();
        if n == 0.0 {
            return 0.0;
        }
        log_scale = 2.0 * log_scale + n.ln();
        p /= n;
    }
    (log_scale / k).exp()
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().iter().copied().fold(0.0, f64::max)
}
