//! Nonnegative least squares on normal equations.
//!
//! Minimizes `f(x) = x' G x - 2 b' x` subject to `x >= 0` for a symmetric
//! positive semidefinite `G`. An accelerated projected-gradient phase finds
//! an approximate support, which then seeds a Lawson-Hanson active-set
//! refinement that terminates at an exact KKT point.
//!
//! Rank-deficient systems get a ridge term `1e-8 * trace(G) / p` on the
//! diagonal, which selects (approximately) the minimum-norm solution among
//! the minimizers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Stopping rules for the projected-gradient phase.
#[derive(Debug, Clone, Copy)]
pub struct NnlsOptions {
    pub rel_tol: f64,
    pub max_iters: usize,
    /// Eigenvalue ratio below which the system counts as rank deficient.
    pub rank_tol: f64,
    pub ridge_factor: f64,
}

impl Default for NnlsOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-10, max_iters: 10_000, rank_tol: 1e-12, ridge_factor: 1e-8 }
    }
}

#[derive(Debug, Clone)]
pub struct NnlsSolution {
    pub x: DVector<f64>,
    pub pg_iterations: usize,
    pub active_set_iterations: usize,
    /// Ridge added to the diagonal, if rank deficiency was detected.
    pub ridge: Option<f64>,
    /// Whether the active-set phase certified optimality.
    pub converged: bool,
}

/// Ridge to apply to `gram`, if it is numerically rank deficient.
pub fn ridge_for(gram: &DMatrix<f64>, opts: &NnlsOptions) -> Option<f64> {
    let p = gram.nrows();
    if p == 0 {
        return None;
    }
    let eig = gram.clone().symmetric_eigenvalues();
    let max = eig.iter().copied().fold(0.0, f64::max);
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    if max > 0.0 && min > opts.rank_tol * max {
        return None;
    }
    let trace = gram.trace();
    Some(if trace > 0.0 { opts.ridge_factor * trace / p as f64 } else { opts.ridge_factor })
}

fn with_ridge(gram: &DMatrix<f64>, ridge: Option<f64>) -> DMatrix<f64> {
    let mut g = gram.clone();
    if let Some(r) = ridge {
        for i in 0..g.nrows() {
            g[(i, i)] += r;
        }
    }
    g
}

fn objective(g: &DMatrix<f64>, b: &DVector<f64>, x: &DVector<f64>) -> f64 {
    x.dot(&(g * x)) - 2.0 * b.dot(x)
}

/// Unconstrained minimizer of `x' G x - 2 b' x`, with the ridge fallback.
pub fn solve_unconstrained(gram: &DMatrix<f64>, rhs: &DVector<f64>, opts: &NnlsOptions) -> Result<NnlsSolution> {
    let ridge = ridge_for(gram, opts);
    let g = with_ridge(gram, ridge);
    let x = spd_solve(&g, rhs)?;
    Ok(NnlsSolution { x, pg_iterations: 0, active_set_iterations: 0, ridge, converged: true })
}

fn spd_solve(g: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if g.nrows() == 0 {
        return Ok(DVector::zeros(0));
    }
    if let Some(ch) = g.clone().cholesky() {
        return Ok(ch.solve(b));
    }
    g.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Numerical("singular normal equations".into()))
}

pub fn solve_nnls(gram: &DMatrix<f64>, rhs: &DVector<f64>, opts: &NnlsOptions) -> Result<NnlsSolution> {
    let p = gram.nrows();
    if gram.ncols() != p || rhs.len() != p {
        return Err(Error::DimensionMismatch("gram and rhs shapes disagree".into()));
    }
    if gram.iter().chain(rhs.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite normal equations".into()));
    }
    let ridge = ridge_for(gram, opts);
    let g = with_ridge(gram, ridge);
    if p == 0 || is_optimal_at_zero(rhs) {
        return Ok(NnlsSolution { x: DVector::zeros(p), pg_iterations: 0, active_set_iterations: 0, ridge, converged: true });
    }
    let (x0, pg_iterations) = projected_gradient(&g, rhs, opts);
    let (x, active_set_iterations, converged) = lawson_hanson(&g, rhs, x0)?;
    Ok(NnlsSolution { x, pg_iterations, active_set_iterations, ridge, converged })
}

// With b <= 0 the gradient at zero, 2(G0 - b) = -2b, is nonnegative, so
// zero satisfies the KKT conditions.
fn is_optimal_at_zero(rhs: &DVector<f64>) -> bool {
    rhs.iter().all(|v| *v <= 0.0)
}

// FISTA with restart on objective increase.
fn projected_gradient(g: &DMatrix<f64>, b: &DVector<f64>, opts: &NnlsOptions) -> (DVector<f64>, usize) {
    let p = g.nrows();
    let lipschitz = g.clone().symmetric_eigenvalues().iter().copied().fold(0.0, f64::max);
    if lipschitz <= 0.0 {
        return (DVector::zeros(p), 0);
    }
    let step = 1.0 / lipschitz;
    let mut x = DVector::zeros(p);
    let mut y = x.clone();
    let mut momentum: f64 = 1.0;
    let mut f_prev = 0.0;
    let scale = b.norm_squared() / lipschitz;
    for it in 1..=opts.max_iters {
        let grad = g * &y - b;
        let x_next = (&y - grad * step).map(|v| v.max(0.0));
        let f = objective(g, b, &x_next);
        if f > f_prev {
            // Restart the momentum.
            momentum = 1.0;
            y = x.clone();
            continue;
        }
        let m_next = (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt()) / 2.0;
        y = &x_next + (&x_next - &x) * ((momentum - 1.0) / m_next);
        momentum = m_next;
        x = x_next;
        let change = (f_prev - f).abs();
        f_prev = f;
        if change <= opts.rel_tol * f.abs().max(1e-12 * scale) {
            return (x, it);
        }
    }
    (x, opts.max_iters)
}

/// Lawson-Hanson active set started from a feasible `x`. Returns the
/// solution, iteration count and whether KKT was certified.
fn lawson_hanson(g: &DMatrix<f64>, b: &DVector<f64>, mut x: DVector<f64>) -> Result<(DVector<f64>, usize, bool)> {
    let p = g.nrows();
    let mut passive: Vec<bool> = x.iter().map(|v| *v > 0.0).collect();
    x.iter_mut().zip(&passive).for_each(|(v, &on)| if !on { *v = 0.0 });
    let tol = 1e-12 * b.amax().max(f64::MIN_POSITIVE) * (p as f64).sqrt().max(1.0);
    let max_outer = 3 * p + 10;
    let mut iters = 0;
    let mut last_added: Option<usize> = None;

    loop {
        // Inner loop: move towards the unconstrained solution on the passive set.
        loop {
            iters += 1;
            let idx: Vec<usize> = (0..p).filter(|&i| passive[i]).collect();
            if idx.is_empty() {
                break;
            }
            let z = spd_solve(&g.select_rows(&idx).select_columns(&idx), &b.select_rows(&idx))?;
            if z.iter().all(|v| *v > 0.0) {
                for (k, &i) in idx.iter().enumerate() {
                    x[i] = z[k];
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            let mut blocking = idx[0];
            for (k, &i) in idx.iter().enumerate() {
                if z[k] <= 0.0 {
                    let a = x[i] / (x[i] - z[k]);
                    if a < alpha {
                        alpha = a;
                        blocking = i;
                    }
                }
            }
            for (k, &i) in idx.iter().enumerate() {
                x[i] += alpha * (z[k] - x[i]);
                if x[i] <= 0.0 {
                    x[i] = 0.0;
                    passive[i] = false;
                }
            }
            // The blocking coordinate lands on the bound up to rounding.
            x[blocking] = 0.0;
            passive[blocking] = false;
            if iters > 10 * max_outer {
                return Ok((x, iters, false));
            }
        }

        let dual = b - g * &x;
        let candidate = (0..p)
            .filter(|&i| !passive[i])
            .max_by(|&i, &j| dual[i].total_cmp(&dual[j]));
        match candidate {
            Some(j) if dual[j] > tol => {
                if last_added == Some(j) {
                    // Rounding keeps re-adding the same index.
                    return Ok((x, iters, false));
                }
                passive[j] = true;
                last_added = Some(j);
            }
            _ => return Ok((x, iters, true)),
        }
        if iters > 10 * max_outer {
            return Ok((x, iters, false));
        }
    }
}
