//! Subcommand implementations.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use superhawkes::design::{source_blocks, SourceKey};
use superhawkes::estimators::Diagnostics;
use superhawkes::experiments::{run_experiment, superposition_groups, ExperimentConfig, ExperimentReport};
use superhawkes::io::{load_model, load_sequences, save_sequences};
use superhawkes::recommend::ingest::parse_day;
use superhawkes::recommend::{
    generate_ratings, ingest_and_filter, run_recommendation, write_ratings, FilterParams, RecConfig, RecReport,
    SynthSpec, Window,
};
use superhawkes::simulate::{simulate_many, Sampler};
use superhawkes::{
    bound_expressions, build_multi, build_single, build_super, classify_scenario, fit_ls, fit_mle, recover_sources,
    superpose, BoundReport, EventSequence, FitResult, LsOptions, MleLayout, MleOptions, ScenarioReport,
};

use crate::manifest::Manifest;
use crate::{
    BoundArgs, Cli, Command, ExperimentArgs, FitArgs, FitEstimator, FitStrategy, Method, RecommendArgs, SimulateArgs,
    SynthArgs, UsageError, DEFAULT_SEED,
};

pub fn run(cli: &Cli) -> Result<()> {
    let seed = cli.seed.unwrap_or(DEFAULT_SEED);
    match &cli.command {
        Command::Simulate(args) => simulate(args, seed),
        Command::Fit(args) => fit(args),
        Command::BoundCheck(args) => bound_check(args),
        Command::Experiment(args) => experiment(args, cli.seed, cli.threads),
        Command::Recommend(args) => recommend(args, seed, cli.threads),
        Command::SynthRatings(args) => synth_ratings(args, seed),
    }
}

fn create_writer(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("cannot write {}", path.display()))
}

/// Write to stdout, treating a closed pipe as success.
fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn simulate(args: &SimulateArgs, seed: u64) -> Result<()> {
    let model = load_model(&args.model).with_context(|| format!("cannot load model {}", args.model.display()))?;
    let sampler = match args.method {
        Method::Branching => Sampler::Branching,
        Method::Thinning => Sampler::Thinning,
    };
    let seqs: Vec<EventSequence> = simulate_many(&model, args.horizon, args.num_seqs, sampler, seed, args.source)?
        .into_iter()
        .map(|s| s.with_source(Some(args.source)))
        .collect();
    save_sequences(&seqs, &args.out).with_context(|| format!("cannot write {}", args.out.display()))?;
    let events: usize = seqs.iter().map(EventSequence::len).sum();
    log::info!("wrote {} sequences with {events} events to {}", seqs.len(), args.out.display());
    Ok(())
}

/// Exogenous rates attributed to one source.
#[derive(Debug, Serialize)]
struct SourceRatesOut {
    source: SourceKey,
    sequences: usize,
    mu: Vec<f64>,
}

/// Fitted model as written by `fit`. The `D`, `w`, `mu` and `A` fields form a
/// model file that `simulate` accepts; `mu` is the average rate of a source.
#[derive(Debug, Serialize)]
struct FitFile {
    #[serde(rename = "D")]
    dim: usize,
    w: f64,
    mu: Vec<f64>,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    strategy: &'static str,
    estimator: &'static str,
    sources: Vec<SourceRatesOut>,
    loss: f64,
    iterations: usize,
    spectral_radius: f64,
    stationary: bool,
}

#[derive(Debug, Serialize)]
struct FitDiagnostics<'a> {
    sequences: usize,
    events: usize,
    superposed_groups: Option<usize>,
    warnings: Vec<String>,
    solver: &'a Diagnostics,
}

fn mean_rows(rows: &[Vec<f64>], dim: usize) -> Vec<f64> {
    if rows.is_empty() {
        return vec![0.0; dim];
    }
    (0..dim).map(|d| rows.iter().map(|r| r[d]).sum::<f64>() / rows.len() as f64).collect()
}

fn fit(args: &FitArgs) -> Result<()> {
    let mut seqs = Vec::new();
    for path in &args.data {
        seqs.extend(load_sequences(path).with_context(|| format!("cannot read {}", path.display()))?);
    }
    if args.unconstrained && args.estimator == FitEstimator::Mle {
        return Err(UsageError("--unconstrained applies to the least-squares estimator only".into()).into());
    }
    let w = args.w;
    let ls = LsOptions { nonnegative: !args.unconstrained, ..LsOptions::default() };
    let mle = MleOptions { max_iters: args.max_iters, ..MleOptions::default() };
    let (keys, block) = source_blocks(&seqs);
    let mut warnings = Vec::new();
    let mut groups = None;

    let fit: FitResult = match args.strategy {
        FitStrategy::Single => match args.estimator {
            FitEstimator::Ls => fit_ls(&build_single(&seqs, w)?, &ls)?,
            FitEstimator::Mle => fit_mle(&seqs, w, MleLayout::Single, &mle)?,
        },
        FitStrategy::Multi => match args.estimator {
            FitEstimator::Ls => fit_ls(&build_multi(&seqs, w)?, &ls)?,
            FitEstimator::Mle => fit_mle(&seqs, w, MleLayout::Multi, &mle)?,
        },
        FitStrategy::Super => {
            let mut per_source: Vec<Vec<EventSequence>> = vec![Vec::new(); keys.len()];
            for (seq, &b) in seqs.iter().zip(&block) {
                per_source[b].push(seq.clone());
            }
            let (merged_groups, warning) = superposition_groups(&per_source);
            warnings.extend(warning);
            groups = Some(merged_groups.len());
            match args.estimator {
                FitEstimator::Ls => fit_ls(&build_super(&merged_groups, w)?, &ls)?,
                FitEstimator::Mle => {
                    let merged = merged_groups.iter().map(|g| superpose(g)).collect::<superhawkes::Result<Vec<_>>>()?;
                    fit_mle(&merged, w, MleLayout::Single, &mle)?
                }
            }
        }
    };

    let dim = fit.dim;
    let a = fit.infectivity();
    let sources: Vec<SourceRatesOut> = match args.strategy {
        FitStrategy::Single => vec![],
        FitStrategy::Multi => keys
            .iter()
            .enumerate()
            .map(|(k, &source)| SourceRatesOut {
                source,
                sequences: block.iter().filter(|&&b| b == k).count(),
                mu: fit.mu(k).to_vec(),
            })
            .collect(),
        FitStrategy::Super => {
            let rates = recover_sources(&a, &seqs, w)?;
            keys.iter()
                .enumerate()
                .map(|(k, &source)| {
                    let rows: Vec<Vec<f64>> =
                        rates.iter().zip(&block).filter(|(_, &b)| b == k).map(|(r, _)| r.mu.clone()).collect();
                    SourceRatesOut { source, sequences: rows.len(), mu: mean_rows(&rows, dim) }
                })
                .collect()
        }
    };
    let mu = match args.strategy {
        FitStrategy::Single => fit.mu(0).to_vec(),
        FitStrategy::Multi | FitStrategy::Super => {
            mean_rows(&sources.iter().map(|s| s.mu.clone()).collect::<Vec<_>>(), dim)
        }
    };
    if !fit.stationary {
        log::warn!("fitted model is not stationary (spectral radius {:.4})", fit.spectral_radius);
    }
    let out = FitFile {
        dim,
        w,
        mu,
        a: (0..dim).map(|i| a.row(i).iter().copied().collect()).collect(),
        strategy: match args.strategy {
            FitStrategy::Single => "single",
            FitStrategy::Multi => "multi",
            FitStrategy::Super => "super",
        },
        estimator: fit.estimator.name(),
        sources,
        loss: fit.loss,
        iterations: fit.iterations,
        spectral_radius: fit.spectral_radius,
        stationary: fit.stationary,
    };
    write_json(&args.out, &out)?;
    warnings.extend(fit.diagnostics.warnings.iter().cloned());
    let diagnostics = FitDiagnostics {
        sequences: seqs.len(),
        events: seqs.iter().map(EventSequence::len).sum(),
        superposed_groups: groups,
        warnings,
        solver: &fit.diagnostics,
    };
    write_json(&diagnostics_path(&args.out), &diagnostics)
}

/// `model.json` -> `model.diagnostics.json`.
pub fn diagnostics_path(out: &Path) -> PathBuf {
    out.with_extension("diagnostics.json")
}

#[derive(Debug, Serialize)]
struct BoundOutput {
    #[serde(flatten)]
    report: BoundReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    scenario: Option<ScenarioReport>,
}

fn bound_check(args: &BoundArgs) -> Result<()> {
    let output = match &args.mus {
        Some(path) => {
            let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
            let mus: Vec<Vec<f64>> = serde_json::from_reader(BufReader::new(file))
                .with_context(|| format!("{} is not a JSON array of vectors", path.display()))?;
            let scenario = classify_scenario(&mus)?;
            let dim = mus[0].len();
            if args.dim.is_some_and(|d| d != dim) || args.sources.is_some_and(|m| m != mus.len()) {
                return Err(UsageError(format!(
                    "--D/--M disagree with {} ({} vectors of length {dim})",
                    path.display(),
                    mus.len()
                ))
                .into());
            }
            let report =
                bound_expressions(scenario.b_mu, args.b_a, scenario.b_sigma_mu, dim, mus.len(), args.events)?;
            BoundOutput { report, scenario: Some(scenario) }
        }
        None => {
            let required = |v: Option<f64>, name: &str| v.ok_or_else(|| UsageError(format!("{name} is required")));
            let report = bound_expressions(
                required(args.b_mu, "--B-mu")?,
                args.b_a,
                required(args.b_sigma_mu, "--B-sigma-mu")?,
                args.dim.ok_or_else(|| UsageError("--D is required".into()))?,
                args.sources.ok_or_else(|| UsageError("--M is required".into()))?,
                args.events,
            )?;
            BoundOutput { report, scenario: None }
        }
    };
    emit(&(serde_json::to_string_pretty(&output)? + "\n"))
}

fn experiment(args: &ExperimentArgs, seed: Option<u64>, threads: Option<usize>) -> Result<()> {
    let mut config: ExperimentConfig = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("invalid experiment config {}", path.display()))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = seed {
        config.seed = seed;
    }
    fs::create_dir_all(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?;
    let report = run_experiment(&config)?;
    report.write_results_csv(create_writer(&args.out.join("results.csv"))?)?;
    report.write_summary_csv(create_writer(&args.out.join("summary.csv"))?)?;
    write_json(&args.out.join("report.json"), &report)?;
    let mut manifest = Manifest::new("experiment", config.seed, threads, serde_json::to_value(&config)?);
    manifest.outputs = ["results.csv", "summary.csv", "report.json"].map(String::from).to_vec();
    manifest.write(&args.out)?;
    emit(&experiment_table(&report))
}

fn experiment_table(report: &ExperimentReport) -> String {
    let mut s = format!(
        "{:<4} {:<20} {:>3} {:>3} {:>10} {:>10} {:>8}\n",
        "est", "strategy", "K", "D", "mean_err", "std_err", "failed"
    );
    for r in &report.summary {
        s += &format!(
            "{:<4} {:<20} {:>3} {:>3} {:>10.4} {:>10.4} {:>8}\n",
            r.estimator.name(),
            r.strategy.name(),
            r.models,
            r.dim,
            r.mean_rel_error,
            r.std_rel_error,
            r.failures
        );
    }
    s
}

fn parse_date(raw: &str, flag: &str) -> Result<i64> {
    parse_day(raw).ok_or_else(|| UsageError(format!("{flag}: cannot parse date '{raw}' (expected YYYY-MM-DD)")).into())
}

fn recommend(args: &RecommendArgs, seed: u64, threads: Option<usize>) -> Result<()> {
    let params = FilterParams {
        min_item_ratings: args.min_item_ratings,
        min_train_events: args.min_train_events,
        max_train_events: args.max_train_events,
        min_rating: args.min_rating,
        train: Window::new(
            Some(parse_date(&args.train_start, "--train-start")?),
            Some(parse_date(&args.train_end, "--train-end")?),
        ),
        test: Window::new(
            Some(parse_date(&args.test_start, "--test-start")?),
            Some(parse_date(&args.test_end, "--test-end")?),
        ),
    };
    let config = RecConfig { decay: args.w, group_size: args.group_size, ns: args.ns.clone(), exclude_bought: !args.include_bought };
    params.validate()?;
    config.validate()?;
    let file = File::open(&args.ratings).with_context(|| format!("cannot open {}", args.ratings.display()))?;
    let data = ingest_and_filter(BufReader::new(file), &params)?;
    log::info!(
        "{} users and {} items after filtering ({} malformed rows)",
        data.users.len(),
        data.items.len(),
        data.stats.malformed
    );
    let report = run_recommendation(&data, &config)?;

    fs::create_dir_all(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?;
    let mut recs = create_writer(&args.out.join("recs.jsonl"))?;
    report.write_recs_jsonl(&mut recs)?;
    recs.flush()?;
    fs::write(args.out.join("metrics.json"), report.metrics_json()? + "\n")?;
    write_json(&args.out.join("stats.json"), &report.stats)?;
    let manifest_config = serde_json::json!({ "filters": params, "recommender": config });
    let mut manifest = Manifest::new("recommend", seed, threads, manifest_config);
    manifest.outputs = ["recs.jsonl", "metrics.json", "stats.json"].map(String::from).to_vec();
    manifest.write(&args.out)?;
    emit(&metrics_table(&report))
}

fn metrics_table(report: &RecReport) -> String {
    let mut s = format!("{:>3} {:<18} {:>10} {:>10} {:>10}\n", "N", "recommender", "precision", "recall", "f1");
    for (n, by_rec) in &report.metrics {
        for (r, m) in by_rec {
            s += &format!("{:>3} {:<18} {:>10.3} {:>10.3} {:>10.3}\n", n, r.name(), m.precision, m.recall, m.f1);
        }
    }
    s
}

fn synth_ratings(args: &SynthArgs, seed: u64) -> Result<()> {
    let spec = SynthSpec { users: args.users, items: args.items, clusters: args.clusters, ..SynthSpec::default() };
    spec.validate()?;
    let events = generate_ratings(&spec, seed)?;
    let mut out = create_writer(&args.out)?;
    write_ratings(&events, &mut out)?;
    out.flush()?;
    log::info!("wrote {} ratings to {}", events.len(), args.out.display());
    Ok(())
}
