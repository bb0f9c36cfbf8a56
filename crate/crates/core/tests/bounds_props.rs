// Reference values are written with every digit of the computed result.
#![allow(clippy::excessive_precision)]

use proptest::prelude::*;
use superhawkes::bounds::complexity_term;
use superhawkes::{bound_expressions, classify_scenario, Scenario};

/// Right-hand side of the feasibility condition, written out directly.
fn threshold(b_mu: f64, d: f64, m: f64, i: f64) -> f64 {
    m * b_mu + d * (m + d) * b_mu * (1.0 + m * i / (d * (m + d))).ln() - d * (1.0 + d) * b_mu * (1.0 + m * i / (d * (1.0 + d))).ln()
}

#[test]
fn identical_exogenous_fixtures() {
    // (D, M, I, right-hand side evaluated at 40 significant digits).
    let fixtures = [(5, 10, 50, 76.615_755_798_057_636), (10, 2, 50, 3.607_308_286_682_095_4), (10, 5, 50, 21.705_784_729_407_595)];
    for (d, m, i, rhs) in fixtures {
        let b_sigma = (m * m) as f64;
        let r = bound_expressions(1.0, 0.5, b_sigma, d, m, i).unwrap();
        assert!((r.threshold - rhs).abs() < 1e-10 * rhs, "{} vs {rhs}", r.threshold);
        assert!(!r.condition_holds, "D={d} M={m} I={i}");
        assert!(r.bound_super > r.bound_multi);
    }
}

#[test]
fn single_source_is_an_equality() {
    let r = bound_expressions(2.0, 1.0, 2.0, 4, 1, 30).unwrap();
    assert_eq!(r.bound_super, r.bound_multi);
    assert_eq!(r.bound_super, r.bound_single);
    assert!(r.condition_holds);
    assert!((r.threshold - 2.0).abs() < 1e-12);
}

#[test]
fn negative_bounds_are_rejected() {
    assert!(bound_expressions(-1.0, 0.0, 0.0, 1, 1, 1).is_err());
    assert!(bound_expressions(1.0, 0.0, 0.0, 0, 1, 1).is_err());
}

#[test]
fn scenario_examples() {
    let s = classify_scenario(&[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
    assert_eq!((s.scenario, s.b_sigma_mu, s.b_mu), (Scenario::Identical, 4.0, 1.0));
    let s = classify_scenario(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    assert_eq!((s.scenario, s.b_sigma_mu), (Scenario::Complementary, 2.0));
    let s = classify_scenario(&[vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
    assert_eq!(s.scenario, Scenario::General);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn more_blocks_never_shrink_the_complexity(m in 2usize..=50, d in 1usize..=50, i in 1usize..=500) {
        let lhs = complexity_term(d, m, m, i);
        let rhs = complexity_term(d, 1, m, i);
        prop_assert!(lhs - rhs >= -1e-12, "M={} D={} I={}: {} < {}", m, d, i, lhs, rhs);
    }

    #[test]
    fn complementary_supports_always_qualify(m in 2usize..=50, d in 1usize..=50, i in 1usize..=500, b_mu in 0.01f64..10.0) {
        let r = bound_expressions(b_mu, 1.0, m as f64 * b_mu, d, m, i).unwrap();
        prop_assert!(r.condition_holds);
        prop_assert!(r.bound_super <= r.bound_multi * (1.0 + 1e-12));
        let direct = threshold(b_mu, d as f64, m as f64, i as f64);
        prop_assert!((r.threshold - direct).abs() <= 1e-9 * direct.abs().max(1.0));
    }

    #[test]
    fn complementary_classification_sums_norms(
        vals in prop::collection::vec(0.1f64..5.0, 2..8),
    ) {
        let dim = vals.len();
        let mus: Vec<Vec<f64>> = vals.iter().enumerate().map(|(k, v)| {
            let mut mu = vec![0.0; dim];
            mu[k] = *v;
            mu
        }).collect();
        let s = classify_scenario(&mus).unwrap();
        prop_assert_eq!(s.scenario, Scenario::Complementary);
        let sum: f64 = vals.iter().map(|v| v * v).sum();
        prop_assert!((s.b_sigma_mu - sum).abs() <= 1e-12 * sum);
    }
}
