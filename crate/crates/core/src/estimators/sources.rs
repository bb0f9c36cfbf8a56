use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::design::kernel_integrals;
use crate::error::{Error, Result};
use crate::sequence::EventSequence;

/// Exogenous rates recovered for one sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceRates {
    pub mu: Vec<f64>,
    /// The sequence had no events; `mu` is zero.
    pub empty: bool,
}

/// Per-sequence exogenous rates given a fixed infectivity matrix.
///
/// For each sequence this is the weighted least-squares problem of the
/// single layout restricted to `mu`, with the endogenous part of the
/// compensator moved to the label side. Since `mu_d` only appears in rows of
/// dimension `d` with feature `t_i` and weight `1 / t_i`, the nonnegative
/// solution is `max(0, mean_i (N_d(t_i) - endo_i) / t_i)` over those rows.
/// Dimensions without events get zero.
pub fn recover_sources(a_hat: &DMatrix<f64>, seqs: &[EventSequence], w: f64) -> Result<Vec<SourceRates>> {
    if !(w.is_finite() && w > 0.0) {
        return Err(Error::InvalidParameter(format!("decay must be positive, got {w}")));
    }
    if a_hat.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidParameter("infectivity must be nonnegative".into()));
    }
    seqs.iter()
        .map(|seq| {
            let dim = seq.dim();
            if a_hat.nrows() != dim || a_hat.ncols() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "infectivity is {}x{} but sequence has dimension {dim}",
                    a_hat.nrows(),
                    a_hat.ncols()
                )));
            }
            if seq.is_empty() {
                return Ok(SourceRates { mu: vec![0.0; dim], empty: true });
            }
            let mut sum = vec![0.0; dim];
            let mut rows = vec![0usize; dim];
            let events = seq.events();
            for (i, e) in events.iter().enumerate() {
                rows[e.dim] += 1;
                let integrals = kernel_integrals(&events[..i], w, e.t, dim);
                let endo: f64 = integrals.iter().enumerate().map(|(dp, v)| a_hat[(e.dim, dp)] * v).sum();
                sum[e.dim] += (rows[e.dim] as f64 - endo) / e.t;
            }
            let mu = sum
                .iter()
                .zip(&rows)
                .map(|(s, &n)| if n == 0 { 0.0 } else { (s / n as f64).max(0.0) })
                .collect();
            Ok(SourceRates { mu, empty: false })
        })
        .collect()
}
