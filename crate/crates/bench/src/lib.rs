//! Shared fixtures for the criterion benchmarks in `benches/`.

use superhawkes::simulate::{make_synthetic_suite, SuiteSpec, SyntheticSuite};

/// A synthetic suite of `models` processes in `dim` dimensions with
/// `seqs_per_model` sequences on `[0, 100]`, drawn from a fixed seed.
pub fn suite(models: usize, dim: usize, seqs_per_model: usize) -> SyntheticSuite {
    make_synthetic_suite(&SuiteSpec::new(models, dim, seqs_per_model, 100.0), 42).expect("benchmark suite")
}
