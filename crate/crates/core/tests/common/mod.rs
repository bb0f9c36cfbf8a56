//! Reference computations shared by the integration tests. They are written
//! from the definitions, independently of the library internals.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use superhawkes::{EventSequence, RegressionBundle};

/// Log-likelihood by the direct double sum over event pairs. `mu[b]` is the
/// exogenous vector of block `b` and `block_of[k]` the block of sequence `k`;
/// `a[(d, d')]` is the infectivity and the kernel is `exp(-w t)`.
pub fn direct_log_likelihood(
    seqs: &[EventSequence],
    mu: &[Vec<f64>],
    block_of: &[usize],
    a: &DMatrix<f64>,
    w: f64,
) -> f64 {
    let mut ll = 0.0;
    for (s, &b) in seqs.iter().zip(block_of) {
        let ev = s.events();
        for (i, e) in ev.iter().enumerate() {
            let mut lambda = mu[b][e.dim];
            for p in &ev[..i] {
                lambda += a[(e.dim, p.dim)] * (-w * (e.t - p.t)).exp();
            }
            ll += lambda.ln();
        }
        let t = s.horizon();
        ll -= mu[b].iter().sum::<f64>() * t;
        for p in ev {
            let mass = (1.0 - (-w * (t - p.t)).exp()) / w;
            ll -= (0..s.dim()).map(|d| a[(d, p.dim)]).sum::<f64>() * mass;
        }
    }
    ll
}

/// Split a theta vector `[mu blocks; vec(A) column-major]`.
pub fn unpack(theta: &[f64], dim: usize, blocks: usize) -> (Vec<Vec<f64>>, DMatrix<f64>) {
    let mu = (0..blocks).map(|b| theta[b * dim..(b + 1) * dim].to_vec()).collect();
    let a = DMatrix::from_column_slice(dim, dim, &theta[blocks * dim..]);
    (mu, a)
}

/// Weighted least-squares solution `(X~'X~)^{-1} X~'N~` computed by SVD of
/// `X~ = W X`, plus the condition number of `X~`.
pub fn dense_wls(bundle: &RegressionBundle) -> (DVector<f64>, f64) {
    let x = bundle.to_dense();
    let mut xt = x.clone();
    let mut y = DVector::zeros(bundle.n_rows());
    for r in 0..bundle.n_rows() {
        let w = bundle.weights()[r];
        xt.row_mut(r).scale_mut(w);
        y[r] = w * bundle.labels()[r];
    }
    let svd = xt.svd(true, true);
    let sv = &svd.singular_values;
    let cond = sv.max() / sv.min();
    (svd.solve(&y, 0.0).expect("svd solve"), cond)
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_statistic(x: &[f64], y: &[f64]) -> f64 {
    let mut a = x.to_vec();
    let mut b = y.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

/// Asymptotic two-sided KS p-value, `Q(sqrt(n_e) D)` with the usual
/// small-sample correction.
pub fn ks_p_value(d: f64, n: usize, m: usize) -> f64 {
    let ne = (n * m) as f64 / (n + m) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    let mut sum = 0.0;
    for k in 1..=200 {
        let k = k as f64;
        let term = 2.0 * (-1f64).powi(k as i32 - 1) * (-2.0 * k * k * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// Random one-dimensional regression problems, cycling through the single,
/// multi-source and superposition layouts, keeping only those whose
/// unconstrained optimum is strictly positive and whose weighted design has
/// condition number below `1e8`. Returns `(bundle, oracle solution)`.
pub fn feasible_ls_instances(count: usize) -> Vec<(RegressionBundle, DVector<f64>)> {
    use rand::Rng;
    use superhawkes::rng::substream;
    use superhawkes::simulate::{simulate_with, Sampler};
    use superhawkes::{build_multi, build_single, build_super, HawkesModel};

    let mut out = Vec::new();
    for seed in 0u64.. {
        if out.len() == count {
            break;
        }
        assert!(seed < 50 * count as u64, "too few feasible instances");
        let mut rng = substream(seed, &[7]);
        let mu = rng.random_range(0.2..1.0);
        let a = rng.random_range(0.05..0.6);
        let model = HawkesModel::from_rows(vec![mu], &[vec![a]], 1.0).unwrap();
        let n = rng.random_range(2..6);
        let seqs: Vec<EventSequence> = (0..n)
            .map(|k| {
                simulate_with(Sampler::Branching, &model, 50.0, &mut rng)
                    .unwrap()
                    .with_source(Some(k as u64 % 2))
            })
            .collect();
        let bundle = match seed % 3 {
            0 => build_single(&seqs, 1.0),
            1 => build_multi(&seqs, 1.0),
            _ => build_super(&seqs.chunks(2).map(|c| c.to_vec()).collect::<Vec<_>>(), 1.0),
        };
        let Ok(bundle) = bundle else { continue };
        let (oracle, cond) = dense_wls(&bundle);
        if oracle.min() > 1e-6 && cond < 1e8 {
            out.push((bundle, oracle));
        }
    }
    out
}

/// Five users' top-2 lists and truth sets. Per-user (P, R, F1) at N = 2:
/// (1/2, 1, 2/3), (1, 1, 1), (0, 0, 0), (1/2, 1/3, 2/5), empty list (0, 0, 0).
pub fn five_user_fixture() -> (Vec<Vec<usize>>, Vec<std::collections::BTreeSet<usize>>) {
    use std::collections::BTreeSet;
    let recs = vec![vec![0, 1], vec![2, 3], vec![4, 0], vec![1, 2], vec![]];
    let truth = vec![
        BTreeSet::from([1]),
        BTreeSet::from([2, 3]),
        BTreeSet::from([1, 2, 3]),
        BTreeSet::from([2, 4, 5]),
        BTreeSet::from([0]),
    ];
    (recs, truth)
}
