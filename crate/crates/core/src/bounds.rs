//! Excess-risk bound expressions for the multi-source, superposed and
//! single-process least-squares strategies, and the condition under which
//! superposition gives the tighter bound.
//!
//! All values are reported up to a common universal constant (set to one),
//! so only comparisons between them are meaningful.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bound values for one problem size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub b_mu: f64,
    pub b_a: f64,
    pub b_sigma_mu: f64,
    pub dim: usize,
    pub sources: usize,
    pub events_per_sequence: usize,
    pub bound_multi: f64,
    pub bound_super: f64,
    pub bound_single: f64,
    /// Largest `B_sigma_mu` for which superposition still wins.
    pub threshold: f64,
    pub condition_holds: bool,
    pub note: String,
}

/// `D (K + D) log(1 + M I / (D (K + D)))`: the complexity term of a model
/// with `K` exogenous blocks.
pub fn complexity_term(dim: usize, blocks: usize, sources: usize, events: usize) -> f64 {
    let params = (dim * (blocks + dim)) as f64;
    let samples = (sources * events) as f64;
    params * (samples / params).ln_1p()
}

/// Evaluate the three bounds and the feasibility condition
/// `B_sigma_mu <= M B_mu + D(M+D) B_mu log(1 + MI/(D(M+D))) - D(1+D) B_mu log(1 + MI/(D(1+D)))`.
pub fn bound_expressions(
    b_mu: f64,
    b_a: f64,
    b_sigma_mu: f64,
    dim: usize,
    sources: usize,
    events_per_sequence: usize,
) -> Result<BoundReport> {
    for (name, v) in [("B_mu", b_mu), ("B_A", b_a), ("B_sigma_mu", b_sigma_mu)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::InvalidParameter(format!("{name} must be a nonnegative number, got {v}")));
        }
    }
    if dim == 0 || sources == 0 || events_per_sequence == 0 {
        return Err(Error::InvalidParameter("D, M and I must be at least 1".into()));
    }
    let m = sources as f64;
    let samples = m * events_per_sequence as f64;
    let multi_term = complexity_term(dim, sources, sources, events_per_sequence);
    let single_term = complexity_term(dim, 1, sources, events_per_sequence);

    let bound_multi = (b_a + m * b_mu + multi_term * b_mu) / samples;
    let bound_super = (b_a + b_sigma_mu + single_term * b_mu) / samples;
    let bound_single = (b_a + b_mu + single_term * b_mu) / samples;
    let threshold = m * b_mu + multi_term * b_mu - single_term * b_mu;
    let condition_holds = b_sigma_mu <= threshold;
    // Same inequality as the threshold comparison, written on the bounds.
    debug_assert!(!condition_holds || bound_super <= bound_multi * (1.0 + 1e-12) + 1e-300);

    Ok(BoundReport {
        b_mu,
        b_a,
        b_sigma_mu,
        dim,
        sources,
        events_per_sequence,
        bound_multi,
        bound_super,
        bound_single,
        threshold,
        condition_holds,
        note: "values are up to a universal constant".into(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    /// All exogenous vectors are equal.
    Identical,
    /// Supports are pairwise disjoint.
    Complementary,
    General,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: Scenario,
    /// `||sum_m mu^m||^2`.
    pub b_sigma_mu: f64,
    /// `max_m ||mu^m||^2`.
    pub b_mu: f64,
    pub sources: usize,
}

/// Classify a set of exogenous vectors and compute the empirical bounds.
///
/// A set that is both identical and complementary (all zero vectors, or a
/// single vector) is reported as identical.
pub fn classify_scenario(mus: &[Vec<f64>]) -> Result<ScenarioReport> {
    let first = mus.first().ok_or_else(|| Error::EmptyData("no exogenous vectors".into()))?;
    let dim = first.len();
    if mus.iter().any(|m| m.len() != dim) {
        return Err(Error::DimensionMismatch("exogenous vectors differ in length".into()));
    }
    let identical = mus.iter().all(|m| m == first);
    let complementary = (0..dim).all(|d| mus.iter().filter(|m| m[d] != 0.0).count() <= 1);
    let scenario = if identical {
        Scenario::Identical
    } else if complementary {
        Scenario::Complementary
    } else {
        Scenario::General
    };
    let sum: Vec<f64> = (0..dim).map(|d| mus.iter().map(|m| m[d]).sum()).collect();
    let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
    Ok(ScenarioReport {
        scenario,
        b_sigma_mu: sq(&sum),
        b_mu: mus.iter().map(|m| sq(m)).fold(0.0, f64::max),
        sources: mus.len(),
    })
}
