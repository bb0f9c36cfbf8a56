//! EM maximum likelihood with exponential kernel `a * exp(-w t)`.
//!
//! With `R_i[d'] = sum_{j < i, d_j = d'} exp(-w (t_i - t_j))` the intensity at
//! event `i` is `mu_{d_i} + sum_{d'} a[d_i][d'] R_i[d']`. The responsibility
//! of the background is `mu_{d_i} / lambda_i` and the total responsibility of
//! dimension-`d'` parents is `a[d_i][d'] R_i[d'] / lambda_i`. The M step is
//!
//! ```text
//! mu_d      <- sum of background responsibilities of dim-d events / (sequences * T)
//! a[d][d']  <- sum over dim-d events of parent responsibilities in d'
//!              / sum_{j: d_j = d'} (1 - exp(-w (T - t_j))) / w
//! ```
//!
//! `R_i` does not depend on the parameters, so it is computed once by the
//! usual recursion and every iteration costs `O(events * D)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{Diagnostics, Estimator, FitResult};
use crate::design::{source_blocks, Layout};
use crate::error::{Error, Result};
use crate::sequence::EventSequence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MleLayout {
    /// One exogenous vector for all sequences.
    Single,
    /// One exogenous vector per source, shared infectivity.
    Multi,
}

#[derive(Debug, Clone)]
pub struct MleOptions {
    pub max_iters: usize,
    /// Stop once the relative log-likelihood improvement falls below this
    /// and the parameters have settled (see `param_tol`).
    pub tol: f64,
    /// Largest parameter change per iteration, relative to `max(1, |theta|)`,
    /// that still counts as settled. The log-likelihood alone stalls at
    /// rounding level while EM is still moving along flat directions.
    pub param_tol: f64,
    /// Hold the infectivity matrix fixed instead of estimating it.
    pub fixed_infectivity: Option<DMatrix<f64>>,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self { max_iters: 5_000, tol: 1e-10, param_tol: 1e-9, fixed_infectivity: None }
    }
}

struct Prepared {
    dim: usize,
    decay: f64,
    blocks: usize,
    seqs: Vec<PreparedSeq>,
    /// Observation time per exogenous block.
    exposure: Vec<f64>,
    /// `sum_j (1 - exp(-w (T - t_j))) / w` per parent dimension.
    parent_mass: Vec<f64>,
    counts: Vec<Vec<usize>>,
}

struct PreparedSeq {
    block: usize,
    dims: Vec<usize>,
    recur: Vec<f64>,
}

impl Prepared {
    fn new(seqs: &[EventSequence], w: f64, block_of: &[usize], blocks: usize) -> Result<Self> {
        let first = seqs.first().ok_or_else(|| Error::EmptyData("no sequences".into()))?;
        let dim = first.dim();
        let mut exposure = vec![0.0; blocks];
        let mut parent_mass = vec![0.0; dim];
        let mut counts = vec![vec![0usize; dim]; blocks];
        let mut prepared = Vec::with_capacity(seqs.len());
        for (seq, &block) in seqs.iter().zip(block_of) {
            if seq.dim() != dim {
                return Err(Error::DimensionMismatch("sequences of different dimensions".into()));
            }
            let horizon = seq.horizon();
            exposure[block] += horizon;
            let events = seq.events();
            let mut recur = vec![0.0; events.len() * dim];
            for i in 1..events.len() {
                let k = (-w * (events[i].t - events[i - 1].t)).exp();
                for d in 0..dim {
                    let prev = recur[(i - 1) * dim + d] + if events[i - 1].dim == d { 1.0 } else { 0.0 };
                    recur[i * dim + d] = prev * k;
                }
            }
            for e in events {
                parent_mass[e.dim] += -(-w * (horizon - e.t)).exp_m1() / w;
                counts[block][e.dim] += 1;
            }
            prepared.push(PreparedSeq { block, dims: events.iter().map(|e| e.dim).collect(), recur });
        }
        if counts.iter().flatten().all(|&c| c == 0) {
            return Err(Error::EmptyData("sequences contain no events".into()));
        }
        Ok(Self { dim, decay: w, blocks, seqs: prepared, exposure, parent_mass, counts })
    }

    fn compensator(&self, mu: &[f64], a: &DMatrix<f64>) -> f64 {
        let exo: f64 = (0..self.blocks)
            .map(|b| self.exposure[b] * mu[b * self.dim..(b + 1) * self.dim].iter().sum::<f64>())
            .sum();
        let endo: f64 = (0..self.dim)
            .map(|dp| self.parent_mass[dp] * a.column(dp).sum())
            .sum();
        exo + endo
    }

    /// Log-likelihood at `(mu, a)`; with `acc` also accumulates the E step.
    fn e_step(&self, mu: &[f64], a: &DMatrix<f64>, mut acc: Option<(&mut [f64], &mut DMatrix<f64>)>) -> Result<f64> {
        let dim = self.dim;
        let mut ll = 0.0;
        for s in &self.seqs {
            for (i, &d) in s.dims.iter().enumerate() {
                let r = &s.recur[i * dim..(i + 1) * dim];
                let base = mu[s.block * dim + d];
                let lambda = base + (0..dim).map(|dp| a[(d, dp)] * r[dp]).sum::<f64>();
                if !(lambda > 0.0) {
                    return Err(Error::Numerical(format!("non-positive intensity {lambda} at an event")));
                }
                ll += lambda.ln();
                if let Some((bg, parents)) = acc.as_mut() {
                    bg[s.block * dim + d] += base / lambda;
                    for dp in 0..dim {
                        parents[(d, dp)] += a[(d, dp)] * r[dp] / lambda;
                    }
                }
            }
        }
        Ok(ll - self.compensator(mu, a))
    }
}

fn layout_blocks(seqs: &[EventSequence], layout: MleLayout) -> (Layout, Vec<usize>, usize) {
    match layout {
        MleLayout::Single => (Layout::Single, vec![0; seqs.len()], 1),
        MleLayout::Multi => {
            let (sources, block) = source_blocks(seqs);
            let n = sources.len();
            (Layout::Multi { sources }, block, n)
        }
    }
}

/// Maximum likelihood by EM. The log-likelihood of every iterate is kept in
/// `diagnostics.loss_trace` (as its negative) and never decreases.
pub fn fit_mle(seqs: &[EventSequence], w: f64, layout: MleLayout, opts: &MleOptions) -> Result<FitResult> {
    if !(w.is_finite() && w > 0.0) {
        return Err(Error::InvalidParameter(format!("decay must be positive, got {w}")));
    }
    let (layout, block_of, blocks) = layout_blocks(seqs, layout);
    let data = Prepared::new(seqs, w, &block_of, blocks)?;
    let dim = data.dim;

    let mut mu: Vec<f64> = (0..blocks)
        .flat_map(|b| {
            let n_seq = block_of.iter().filter(|&&k| k == b).count().max(1) as f64;
            let t = data.exposure[b] / n_seq;
            let counts = &data.counts[b];
            (0..dim).map(move |d| 0.5 * counts[d] as f64 / (n_seq * t))
        })
        .collect();
    let fixed = opts.fixed_infectivity.clone();
    let mut a = match &fixed {
        Some(a) => {
            if a.nrows() != dim || a.ncols() != dim {
                return Err(Error::DimensionMismatch("fixed infectivity has the wrong shape".into()));
            }
            a.clone()
        }
        None => DMatrix::from_element(dim, dim, 0.1 / dim as f64),
    };

    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut prev = f64::NEG_INFINITY;
    let mut step = f64::INFINITY;
    for _ in 0..opts.max_iters {
        let mut bg = vec![0.0; mu.len()];
        let mut parents = DMatrix::zeros(dim, dim);
        let ll = data.e_step(&mu, &a, Some((&mut bg, &mut parents)))?;
        trace.push(-ll);
        if prev.is_finite() && (ll - prev) <= opts.tol * ll.abs() && step <= opts.param_tol {
            converged = true;
            break;
        }
        prev = ll;
        iterations += 1;
        step = 0.0;
        let settle = |old: f64, new: f64| (new - old).abs() / old.abs().max(1.0);
        for (m, (b, exp)) in mu
            .iter_mut()
            .zip(bg.iter().zip((0..blocks).flat_map(|b| std::iter::repeat_n(data.exposure[b], dim))))
        {
            let new = b / exp;
            step = step.max(settle(*m, new));
            *m = new;
        }
        if fixed.is_none() {
            for dp in 0..dim {
                let mass = data.parent_mass[dp];
                for d in 0..dim {
                    let new = if mass > 0.0 { parents[(d, dp)] / mass } else { 0.0 };
                    step = step.max(settle(a[(d, dp)], new));
                    a[(d, dp)] = new;
                }
            }
        }
    }
    let ll = data.e_step(&mu, &a, None)?;
    if !converged {
        trace.push(-ll);
    }
    let mut theta = mu;
    theta.extend(a.iter().copied());
    let diag = Diagnostics { converged, loss_trace: trace, ..Diagnostics::default() };
    Ok(FitResult::new(Estimator::Mle, layout, dim, data.decay, theta, -ll, iterations, diag))
}

/// Log-likelihood of `fit`'s parameters on `seqs`, with the exogenous
/// blocks assigned as in the fit's layout.
pub fn log_likelihood(fit: &FitResult, seqs: &[EventSequence]) -> Result<f64> {
    let (block_of, blocks) = match fit.layout {
        Layout::Multi { .. } => {
            let (sources, block) = source_blocks(seqs);
            (block, sources.len())
        }
        _ => (vec![0; seqs.len()], 1),
    };
    if blocks != fit.mu_blocks() {
        return Err(Error::DimensionMismatch("sources do not match the fit".into()));
    }
    let data = Prepared::new(seqs, fit.decay, &block_of, blocks)?;
    let a = fit.infectivity();
    data.e_step(&fit.theta[..blocks * fit.dim], &a, None)
}
