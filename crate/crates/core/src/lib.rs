//! Learning multivariate Hawkes processes with exponential kernels from
//! event sequences, with particular attention to sequences that share an
//! infectivity matrix but differ in their exogenous rates.
//!
//! The crate covers the whole pipeline:
//!
//! * [`model`] and [`sequence`]: the model and the event data, including
//!   superposition of sequences.
//! * [`simulate`]: branching (cluster) and thinning samplers.
//! * [`design`]: weighted least-squares regression problems for the
//!   single, multi-source and superposed strategies.
//! * [`estimators`]: nonnegative least squares, per-source rate recovery and
//!   EM maximum likelihood.
//! * [`bounds`]: excess-risk bound expressions and the condition under
//!   which superposition tightens them.
//! * [`experiments`]: the synthetic strategy comparison harness.
//! * [`recommend`]: cold-start top-N recommendation from a learned
//!   infectivity matrix.

// Validation is written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod design;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod io;
pub mod model;
pub mod nnls;
pub mod recommend;
pub mod rng;
pub mod sequence;
pub mod simulate;

pub use bounds::{bound_expressions, classify_scenario, BoundReport, Scenario, ScenarioReport};
pub use design::{build_multi, build_single, build_super, compensator_features, Layout, RegressionBundle};
pub use error::{Error, Result};
pub use estimators::{fit_ls, fit_mle, recover_sources, Estimator, FitResult, LsOptions, MleLayout, MleOptions};
pub use model::{HawkesModel, ModelValidation};
pub use sequence::{superpose, Event, EventSequence};
