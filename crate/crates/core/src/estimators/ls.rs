use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Diagnostics, Estimator, FitResult};
use crate::design::RegressionBundle;
use crate::error::Result;
use crate::nnls::{solve_nnls, solve_unconstrained, NnlsOptions};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LsOptions {
    /// Enforce `theta >= 0`. Turning this off gives the plain weighted
    /// least-squares solution.
    pub nonnegative: bool,
    pub rel_tol: f64,
    pub max_iters: usize,
}

impl Default for LsOptions {
    fn default() -> Self {
        let n = NnlsOptions::default();
        Self { nonnegative: true, rel_tol: n.rel_tol, max_iters: n.max_iters }
    }
}

/// Minimize `||W (N - X theta)||^2` for a bundle of any layout.
///
/// Every row only touches the parameters of its own target dimension, so
/// the problem splits into independent blocks of columns; each block is
/// solved on its own normal equations and the results are stitched back.
pub fn fit_ls(bundle: &RegressionBundle, opts: &LsOptions) -> Result<FitResult> {
    let nnls = NnlsOptions { rel_tol: opts.rel_tol, max_iters: opts.max_iters, ..NnlsOptions::default() };
    let blocks = bundle.independent_blocks();
    let solved = blocks
        .par_iter()
        .map(|(rows, cols)| solve_block(bundle, rows, cols, opts.nonnegative, &nnls))
        .collect::<Result<Vec<_>>>()?;

    let mut theta = vec![0.0; bundle.n_cols()];
    let mut diag = Diagnostics { unconstrained: !opts.nonnegative, converged: true, ..Diagnostics::default() };
    let mut iterations = 0;
    for ((_, cols), block) in blocks.iter().zip(solved) {
        match block {
            None => diag.unidentified += cols.len(),
            Some(b) => {
                for (&c, v) in cols.iter().zip(b.x.iter()) {
                    theta[c] = if opts.nonnegative { v.max(0.0) } else { *v };
                }
                if b.ridge.is_some() {
                    diag.ridge_blocks += 1;
                }
                diag.converged &= b.converged;
                iterations = iterations.max(b.pg_iterations + b.active_set_iterations);
            }
        }
    }
    diag.ridge = diag.ridge_blocks > 0;
    if bundle.n_rows() < bundle.n_cols() {
        diag.warnings.push(format!(
            "underdetermined: {} rows for {} parameters",
            bundle.n_rows(),
            bundle.n_cols()
        ));
    }
    if diag.ridge {
        log::debug!("ridge fallback engaged on {} blocks", diag.ridge_blocks);
    }
    let loss = bundle.loss(&theta);
    Ok(FitResult::new(
        Estimator::Ls,
        bundle.layout().clone(),
        bundle.dim(),
        bundle.decay(),
        theta,
        loss,
        iterations,
        diag,
    ))
}

fn solve_block(
    bundle: &RegressionBundle,
    rows: &[usize],
    cols: &[usize],
    nonnegative: bool,
    nnls: &NnlsOptions,
) -> Result<Option<crate::nnls::NnlsSolution>> {
    if rows.is_empty() {
        return Ok(None);
    }
    let p = cols.len();
    let local = |c: usize| cols.binary_search(&c).expect("column belongs to block");
    let mut gram = DMatrix::zeros(p, p);
    let mut rhs = DVector::zeros(p);
    for &r in rows {
        let (c, v) = bundle.row(r);
        let w2 = bundle.weights()[r].powi(2);
        let y = bundle.labels()[r];
        let lc: Vec<usize> = c.iter().map(|&c| local(c)).collect();
        for (i, (&ci, &vi)) in lc.iter().zip(v).enumerate() {
            rhs[ci] += w2 * vi * y;
            for (&cj, &vj) in lc[..=i].iter().zip(v) {
                gram[(ci, cj)] += w2 * vi * vj;
                if ci != cj {
                    gram[(cj, ci)] += w2 * vi * vj;
                }
            }
        }
    }
    let sol = if nonnegative { solve_nnls(&gram, &rhs, nnls)? } else { solve_unconstrained(&gram, &rhs, nnls)? };
    Ok(Some(sol))
}
