//! Estimators for the shared-infectivity Hawkes model.
//!
//! * [`fit_ls`] solves any [`RegressionBundle`](crate::design::RegressionBundle)
//!   under `theta >= 0` (or unconstrained on request).
//! * [`recover_sources`] re-estimates per-source exogenous rates once an
//!   infectivity matrix is known, which is how individual rates are obtained
//!   after learning from superposed data.
//! * [`fit_mle`] maximizes the log-likelihood by EM over the latent
//!   branching structure.

mod ls;
mod mle;
mod sources;

pub use ls::{fit_ls, LsOptions};
pub use mle::{fit_mle, log_likelihood, MleLayout, MleOptions};
pub use sources::{recover_sources, SourceRates};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::design::Layout;
use crate::error::{Error, Result};
use crate::model::{spectral_radius, HawkesModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Ls,
    Mle,
}

/// Solver bookkeeping attached to a fit.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Ridge was added to at least one rank-deficient block.
    pub ridge: bool,
    pub ridge_blocks: usize,
    /// Parameters with no data at all; they are returned as zero.
    pub unidentified: usize,
    pub unconstrained: bool,
    pub converged: bool,
    /// Loss (or negative log-likelihood) per iteration, where tracked.
    pub loss_trace: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Parameters estimated by one of the strategies.
///
/// `theta` follows the layout of [`crate::design`]: `mu_blocks` exogenous
/// vectors of length `dim`, then `vec(A)` column-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub estimator: Estimator,
    pub layout: Layout,
    pub dim: usize,
    pub decay: f64,
    pub theta: Vec<f64>,
    pub loss: f64,
    pub iterations: usize,
    pub spectral_radius: f64,
    pub stationary: bool,
    pub diagnostics: Diagnostics,
}

impl FitResult {
    #[allow(clippy::too_many_arguments)]
    fn new(
        estimator: Estimator,
        layout: Layout,
        dim: usize,
        decay: f64,
        theta: Vec<f64>,
        loss: f64,
        iterations: usize,
        diagnostics: Diagnostics,
    ) -> Self {
        let mut fit = Self {
            estimator,
            layout,
            dim,
            decay,
            theta,
            loss,
            iterations,
            spectral_radius: 0.0,
            stationary: true,
            diagnostics,
        };
        fit.spectral_radius = spectral_radius(&(fit.infectivity() / decay));
        fit.stationary = fit.spectral_radius < 1.0;
        if !fit.stationary {
            fit.diagnostics
                .warnings
                .push(format!("fitted model is not stationary (radius {:.4})", fit.spectral_radius));
        }
        fit
    }

    pub fn mu_blocks(&self) -> usize {
        self.theta.len() / self.dim - self.dim
    }

    /// Exogenous rates of block `k`.
    pub fn mu(&self, k: usize) -> &[f64] {
        &self.theta[k * self.dim..(k + 1) * self.dim]
    }

    /// Sum of the exogenous blocks (the rate of the superposed process).
    pub fn mu_total(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|d| (0..self.mu_blocks()).map(|k| self.mu(k)[d]).sum())
            .collect()
    }

    pub fn infectivity(&self) -> DMatrix<f64> {
        let offset = self.mu_blocks() * self.dim;
        DMatrix::from_column_slice(self.dim, self.dim, &self.theta[offset..])
    }

    /// One model per exogenous block, sharing the infectivity matrix.
    pub fn models(&self) -> Result<Vec<HawkesModel>> {
        let a = self.infectivity();
        (0..self.mu_blocks())
            .map(|k| HawkesModel::new(self.mu(k).to_vec(), a.clone(), self.decay))
            .collect()
    }

    /// The model for the summed exogenous rate.
    pub fn total_model(&self) -> Result<HawkesModel> {
        HawkesModel::new(self.mu_total(), self.infectivity(), self.decay)
    }
}

/// Inverse of [`FitResult::models`]: stack exogenous blocks and `vec(A)`.
pub fn theta_from_models(models: &[HawkesModel]) -> Result<Vec<f64>> {
    let first = models
        .first()
        .ok_or_else(|| Error::EmptyData("no models".into()))?;
    if models.iter().any(|m| m.infectivity() != first.infectivity() || m.decay() != first.decay()) {
        return Err(Error::InvalidParameter("models do not share infectivity and decay".into()));
    }
    let mut theta: Vec<f64> = models.iter().flat_map(|m| m.mu().iter().copied()).collect();
    theta.extend(first.infectivity().iter().copied());
    Ok(theta)
}
