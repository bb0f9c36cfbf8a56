mod common;

use nalgebra::DMatrix;
use rand::Rng;
use superhawkes::model::spectral_radius;
use superhawkes::rng::substream;
use superhawkes::simulate::{simulate_many, Sampler};
use superhawkes::HawkesModel;

fn counts(model: &HawkesModel, sampler: Sampler, horizon: f64, n: usize, stream: u64) -> Vec<Vec<f64>> {
    let seqs = simulate_many(model, horizon, n, sampler, 2024, stream).unwrap();
    seqs.iter()
        .map(|s| {
            let mut c: Vec<f64> = s.counts().into_iter().map(|x| x as f64).collect();
            c.push(s.len() as f64);
            c
        })
        .collect()
}

#[test]
fn samplers_agree_in_distribution() {
    let model = HawkesModel::from_rows(vec![0.3, 0.2], &[vec![0.4, 0.2], vec![0.1, 0.3]], 1.2).unwrap();
    let a = counts(&model, Sampler::Branching, 40.0, 500, 1);
    let b = counts(&model, Sampler::Thinning, 40.0, 500, 2);
    for col in 0..3 {
        let x: Vec<f64> = a.iter().map(|r| r[col]).collect();
        let y: Vec<f64> = b.iter().map(|r| r[col]).collect();
        let d = common::ks_statistic(&x, &y);
        let p = common::ks_p_value(d, x.len(), y.len());
        assert!(p >= 0.01, "column {col}: D = {d}, p = {p}");
    }
}

#[test]
fn long_run_rate_matches_stationary_value() {
    let model = HawkesModel::from_rows(vec![0.5], &[vec![0.5]], 1.0).unwrap();
    let expected = 0.5 / (1.0 - 0.5);
    for sampler in [Sampler::Branching, Sampler::Thinning] {
        let seqs = simulate_many(&model, 1000.0, 20, sampler, 7, 0).unwrap();
        let rate = seqs.iter().map(|s| s.len()).sum::<usize>() as f64 / (20.0 * 1000.0);
        assert!((rate - expected).abs() / expected < 0.05, "{sampler:?}: {rate}");
    }
}

#[test]
fn mean_counts_match_stationary_rates() {
    let model = HawkesModel::from_rows(vec![0.2, 0.4], &[vec![0.3, 0.2], vec![0.2, 0.1]], 1.0).unwrap();
    let rates = model.stationary_rates().unwrap();
    let seqs = simulate_many(&model, 500.0, 40, Sampler::Branching, 99, 0).unwrap();
    for (d, rate) in rates.iter().enumerate() {
        let mean = seqs.iter().map(|s| s.counts()[d]).sum::<usize>() as f64 / (40.0 * 500.0);
        assert!((mean - rate).abs() / rate < 0.05, "dimension {d}: {mean} vs {rate}");
    }
}

/// Power iteration on a strictly positive matrix converges to its Perron root.
fn power_iteration(m: &DMatrix<f64>) -> f64 {
    let mut x = DMatrix::from_element(m.nrows(), 1, 1.0);
    let mut rho = 0.0;
    for _ in 0..10_000 {
        let y = m * &x;
        let next = y.norm() / x.norm();
        x = &y / y.norm();
        if (next - rho).abs() <= 1e-15 * next {
            return next;
        }
        rho = next;
    }
    rho
}

#[test]
fn spectral_radius_matches_power_iteration() {
    let mut rng = substream(5, &[]);
    for _ in 0..50 {
        let n = rng.random_range(1..=12);
        let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(0.01..1.0));
        let exact = spectral_radius(&m);
        let oracle = power_iteration(&m);
        assert!((exact - oracle).abs() <= 1e-9 * oracle.max(1.0), "{exact} vs {oracle}");
    }
}
