//! Synthetic comparison of learning strategies.
//!
//! A trial draws `K` models that share one infectivity matrix (spectral norm
//! 0.5, unit decay) and differ in a single active exogenous rate, simulates
//! a fixed number of sequences per model, and learns `A` four ways:
//!
//! * `single_source_hp`: one process from the sequences of model 0 only;
//! * `multi_source_hp`: one process from all sequences, ignoring sources;
//! * `multi_source_mhp`: per-source exogenous rates with shared `A`;
//! * `superposition_hp`: one process from groups of superposed sequences,
//!   group `g` holding sequence `g` of every model.

use std::io::Write;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{build_multi, build_single, build_super};
use crate::error::{Error, Result};
use crate::estimators::{fit_ls, fit_mle, Estimator, FitResult, LsOptions, MleLayout, MleOptions};
use crate::rng::derive;
use crate::sequence::EventSequence;
use crate::simulate::{make_synthetic_suite, Sampler, SuiteSpec, SyntheticSuite};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    SingleSourceHp,
    MultiSourceHp,
    MultiSourceMhp,
    SuperpositionHp,
}

impl Strategy {
    pub const ALL: [Strategy; 4] =
        [Strategy::SingleSourceHp, Strategy::MultiSourceHp, Strategy::MultiSourceMhp, Strategy::SuperpositionHp];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::SingleSourceHp => "single_source_hp",
            Strategy::MultiSourceHp => "multi_source_hp",
            Strategy::MultiSourceMhp => "multi_source_mhp",
            Strategy::SuperpositionHp => "superposition_hp",
        }
    }
}

impl Estimator {
    pub fn name(self) -> &'static str {
        match self {
            Estimator::Ls => "ls",
            Estimator::Mle => "mle",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Numbers of models `K` to sweep.
    pub models: Vec<usize>,
    pub dims: Vec<usize>,
    pub seqs_per_model: usize,
    pub horizon: f64,
    pub trials: usize,
    pub estimators: Vec<Estimator>,
    pub strategies: Vec<Strategy>,
    pub seed: u64,
    pub decay: f64,
    pub sampler: Sampler,
    pub mle_max_iters: usize,
    pub mle_tol: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            models: vec![2, 5, 10],
            dims: vec![5, 10],
            seqs_per_model: 20,
            horizon: 100.0,
            trials: 10,
            estimators: vec![Estimator::Ls],
            strategies: Strategy::ALL.to_vec(),
            seed: 2018,
            decay: 1.0,
            sampler: Sampler::Branching,
            mle_max_iters: 2_000,
            mle_tol: 1e-8,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be at least 1".into()));
        }
        if self.strategies.is_empty() || self.estimators.is_empty() {
            return Err(Error::InvalidParameter("need at least one strategy and one estimator".into()));
        }
        if self.models.iter().chain(&self.dims).any(|&v| v == 0) || self.models.is_empty() || self.dims.is_empty() {
            return Err(Error::InvalidParameter("model counts and dimensions must be positive".into()));
        }
        if self.seqs_per_model == 0 || !(self.horizon > 0.0) || !(self.decay > 0.0) {
            return Err(Error::InvalidParameter("need sequences, a positive horizon and decay".into()));
        }
        Ok(())
    }

    /// Seed of one trial, derived from the base seed and the grid cell.
    pub fn trial_seed(&self, models: usize, dim: usize, trial: usize) -> u64 {
        derive(self.seed, &[models as u64, dim as u64, trial as u64])
    }
}

/// One fit within one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub estimator: Estimator,
    pub strategy: Strategy,
    pub models: usize,
    pub dim: usize,
    pub trial: usize,
    pub seed: u64,
    pub rel_error: Option<f64>,
    pub seconds: f64,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub estimator: Estimator,
    pub strategy: Strategy,
    pub models: usize,
    pub dim: usize,
    pub trials: usize,
    pub failures: usize,
    pub mean_rel_error: f64,
    pub std_rel_error: f64,
    pub mean_seconds: f64,
}

/// Whether the multi-source MHP strategy beat superposition in a cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub estimator: Estimator,
    pub models: usize,
    pub dim: usize,
    pub mhp_beats_superposition: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub records: Vec<TrialRecord>,
    pub summary: Vec<SummaryRow>,
    pub comparisons: Vec<Comparison>,
}

impl ExperimentReport {
    pub fn row(&self, estimator: Estimator, strategy: Strategy, models: usize, dim: usize) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|r| r.estimator == estimator && r.strategy == strategy && r.models == models && r.dim == dim)
    }

    pub fn mean(&self, estimator: Estimator, strategy: Strategy, models: usize, dim: usize) -> Option<f64> {
        self.row(estimator, strategy, models, dim).map(|r| r.mean_rel_error)
    }

    /// `estimator,strategy,K,D,trial,rel_error,seconds`; failed fits leave
    /// `rel_error` empty.
    pub fn write_results_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["estimator", "strategy", "K", "D", "trial", "rel_error", "seconds"])?;
        for r in &self.records {
            w.write_record([
                r.estimator.name().to_string(),
                r.strategy.name().to_string(),
                r.models.to_string(),
                r.dim.to_string(),
                r.trial.to_string(),
                r.rel_error.map(|e| format!("{e:.12}")).unwrap_or_default(),
                format!("{:.6}", r.seconds),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "estimator",
            "strategy",
            "K",
            "D",
            "trials",
            "failures",
            "mean_rel_error",
            "std_rel_error",
            "mean_seconds",
        ])?;
        for r in &self.summary {
            w.write_record([
                r.estimator.name().to_string(),
                r.strategy.name().to_string(),
                r.models.to_string(),
                r.dim.to_string(),
                r.trials.to_string(),
                r.failures.to_string(),
                format!("{:.12}", r.mean_rel_error),
                format!("{:.12}", r.std_rel_error),
                format!("{:.6}", r.mean_seconds),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `||A_hat - A_star||_F / ||A_star||_F`.
pub fn relative_error(a_hat: &DMatrix<f64>, a_star: &DMatrix<f64>) -> Result<f64> {
    if a_hat.shape() != a_star.shape() {
        return Err(Error::DimensionMismatch(format!(
            "{:?} vs {:?}",
            a_hat.shape(),
            a_star.shape()
        )));
    }
    let norm = a_star.norm();
    if norm == 0.0 {
        return Err(Error::InvalidParameter("reference infectivity is zero".into()));
    }
    Ok((a_hat - a_star).norm() / norm)
}

/// Grouping of sequences for superposition: group `g` takes sequence `g` of
/// every model.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperpositionPlan {
    /// `(model, sequence index within model)` per member.
    pub groups: Vec<Vec<(usize, usize)>>,
    pub warning: Option<String>,
}

/// Plan for models with `counts[k]` sequences each. Unequal counts are
/// paired up to the smallest count, with a warning.
pub fn superposition_plan(counts: &[usize]) -> SuperpositionPlan {
    let n = counts.iter().copied().min().unwrap_or(0);
    let warning = counts.iter().any(|&c| c != n).then(|| {
        format!("unequal sequence counts {counts:?}; superposing the first {n} of each model")
    });
    if let Some(w) = &warning {
        log::warn!("{w}");
    }
    let groups = (0..n).map(|g| (0..counts.len()).map(|k| (k, g)).collect()).collect();
    SuperpositionPlan { groups, warning }
}

/// Apply a plan to per-model sequence lists.
pub fn superposition_groups(per_model: &[Vec<EventSequence>]) -> (Vec<Vec<EventSequence>>, Option<String>) {
    let counts: Vec<usize> = per_model.iter().map(|v| v.len()).collect();
    let plan = superposition_plan(&counts);
    let groups = plan
        .groups
        .iter()
        .map(|g| g.iter().map(|&(k, i)| per_model[k][i].clone()).collect())
        .collect();
    (groups, plan.warning)
}

/// Learn `A` with one strategy and estimator on a suite.
pub fn fit_strategy(
    suite: &SyntheticSuite,
    strategy: Strategy,
    estimator: Estimator,
    config: &ExperimentConfig,
) -> Result<FitResult> {
    let w = config.decay;
    let mle = MleOptions { max_iters: config.mle_max_iters, tol: config.mle_tol, ..MleOptions::default() };
    let ls = LsOptions::default();
    let per_model: Vec<Vec<EventSequence>> =
        (0..suite.models.len()).map(|k| suite.sequences_of(k).cloned().collect()).collect();
    match (strategy, estimator) {
        (Strategy::SingleSourceHp, Estimator::Ls) => fit_ls(&build_single(&per_model[0], w)?, &ls),
        (Strategy::SingleSourceHp, Estimator::Mle) => fit_mle(&per_model[0], w, MleLayout::Single, &mle),
        (Strategy::MultiSourceHp, Estimator::Ls) => fit_ls(&build_single(&suite.sequences, w)?, &ls),
        (Strategy::MultiSourceHp, Estimator::Mle) => fit_mle(&suite.sequences, w, MleLayout::Single, &mle),
        (Strategy::MultiSourceMhp, Estimator::Ls) => fit_ls(&build_multi(&suite.sequences, w)?, &ls),
        (Strategy::MultiSourceMhp, Estimator::Mle) => fit_mle(&suite.sequences, w, MleLayout::Multi, &mle),
        (Strategy::SuperpositionHp, est) => {
            let (groups, _) = superposition_groups(&per_model);
            match est {
                Estimator::Ls => fit_ls(&build_super(&groups, w)?, &ls),
                Estimator::Mle => {
                    let merged = groups
                        .iter()
                        .map(|g| crate::sequence::superpose(g))
                        .collect::<Result<Vec<_>>>()?;
                    fit_mle(&merged, w, MleLayout::Single, &mle)
                }
            }
        }
    }
}

fn run_trial(config: &ExperimentConfig, models: usize, dim: usize, trial: usize) -> Vec<TrialRecord> {
    let seed = config.trial_seed(models, dim, trial);
    let spec = SuiteSpec {
        models,
        dim,
        seqs_per_model: config.seqs_per_model,
        horizon: config.horizon,
        target_events: Some(50.0),
        spectral_norm: 0.5,
        decay: config.decay,
        sampler: config.sampler,
    };
    let suite = make_synthetic_suite(&spec, seed);
    let mut out = Vec::new();
    for &estimator in &config.estimators {
        for &strategy in &config.strategies {
            let start = Instant::now();
            let outcome = suite
                .as_ref()
                .map_err(|e| Error::Numerical(e.to_string()))
                .and_then(|s| {
                    let fit = fit_strategy(s, strategy, estimator, config)?;
                    relative_error(&fit.infectivity(), &s.infectivity)
                });
            let seconds = start.elapsed().as_secs_f64();
            let (rel_error, failure) = match outcome {
                Ok(e) => (Some(e), None),
                Err(e) => (None, Some(e.to_string())),
            };
            out.push(TrialRecord { estimator, strategy, models, dim, trial, seed, rel_error, seconds, failure });
        }
    }
    out
}

/// Run every trial of the grid. Solver failures are recorded per fit and do
/// not abort the run.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let cells: Vec<(usize, usize, usize)> = config
        .models
        .iter()
        .flat_map(|&k| config.dims.iter().flat_map(move |&d| (0..config.trials).map(move |t| (k, d, t))))
        .collect();
    let records: Vec<TrialRecord> = cells
        .par_iter()
        .flat_map_iter(|&(k, d, t)| run_trial(config, k, d, t))
        .collect();

    let mut summary = Vec::new();
    let mut comparisons = Vec::new();
    for &estimator in &config.estimators {
        for &k in &config.models {
            for &d in &config.dims {
                for &strategy in &config.strategies {
                    let cell: Vec<&TrialRecord> = records
                        .iter()
                        .filter(|r| r.estimator == estimator && r.strategy == strategy && r.models == k && r.dim == d)
                        .collect();
                    let errors: Vec<f64> = cell.iter().filter_map(|r| r.rel_error).collect();
                    let (mean, std) = mean_std(&errors);
                    summary.push(SummaryRow {
                        estimator,
                        strategy,
                        models: k,
                        dim: d,
                        trials: cell.len(),
                        failures: cell.len() - errors.len(),
                        mean_rel_error: mean,
                        std_rel_error: std,
                        mean_seconds: cell.iter().map(|r| r.seconds).sum::<f64>() / cell.len().max(1) as f64,
                    });
                }
                let find = |s: Strategy| {
                    summary
                        .iter()
                        .find(|r: &&SummaryRow| r.estimator == estimator && r.strategy == s && r.models == k && r.dim == d)
                        .map(|r| r.mean_rel_error)
                };
                if let (Some(mhp), Some(sup)) = (find(Strategy::MultiSourceMhp), find(Strategy::SuperpositionHp)) {
                    comparisons.push(Comparison { estimator, models: k, dim: d, mhp_beats_superposition: mhp < sup });
                }
            }
        }
    }
    Ok(ExperimentReport { config: config.clone(), records, summary, comparisons })
}

/// Mean and sample standard deviation; NaN mean for no data.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_cases() {
        let a = DMatrix::from_row_slice(2, 2, &[0.1, 0.2, 0.3, 0.4]);
        assert_eq!(relative_error(&a, &a).unwrap(), 0.0);
        assert!((relative_error(&(&a * 2.0), &a).unwrap() - 1.0).abs() < 1e-15);
        assert!((relative_error(&DMatrix::zeros(2, 2), &a).unwrap() - 1.0).abs() < 1e-15);
        assert!(relative_error(&a, &DMatrix::zeros(2, 2)).is_err());
        assert!(relative_error(&a, &DMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn plan_pairs_by_index() {
        let p = superposition_plan(&[20, 20]);
        assert_eq!(p.groups.len(), 20);
        assert!(p.groups.iter().all(|g| g.len() == 2));
        assert_eq!(p.groups[3], vec![(0, 3), (1, 3)]);
        assert!(p.warning.is_none());
    }

    #[test]
    fn plan_identity_for_one_model() {
        let p = superposition_plan(&[20]);
        assert_eq!(p.groups.len(), 20);
        assert!(p.groups.iter().enumerate().all(|(g, m)| m == &vec![(0, g)]));
    }

    #[test]
    fn plan_truncates_unequal_counts() {
        let p = superposition_plan(&[20, 20, 19]);
        assert_eq!(p.groups.len(), 19);
        assert!(p.warning.is_some());
    }

    #[test]
    fn config_validation() {
        let mut c = ExperimentConfig::default();
        assert!(c.validate().is_ok());
        c.trials = 0;
        assert!(c.validate().is_err());
        let c = ExperimentConfig { strategies: vec![], ..ExperimentConfig::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn one_trial_is_reproducible() {
        let config = ExperimentConfig {
            models: vec![2],
            dims: vec![3],
            seqs_per_model: 4,
            horizon: 30.0,
            trials: 1,
            estimators: vec![Estimator::Ls, Estimator::Mle],
            mle_max_iters: 50,
            ..ExperimentConfig::default()
        };
        let a = run_experiment(&config).unwrap();
        let b = run_experiment(&config).unwrap();
        let strip = |r: &ExperimentReport| {
            r.records.iter().map(|x| (x.rel_error, x.failure.clone())).collect::<Vec<_>>()
        };
        assert_eq!(strip(&a), strip(&b));
        assert_eq!(a.records.len(), 8);
        assert!(a.records.iter().all(|r| r.rel_error.unwrap() >= 0.0));
    }
}
