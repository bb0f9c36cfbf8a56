//! `superhawkes` command-line tool.
//!
//! Exit codes: 0 success, 1 usage error, 2 bad input data, 3 numerical
//! failure.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Default seed when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 2018;

/// Environment variable that overrides `--out` for commands writing a directory.
pub const OUT_DIR_ENV: &str = "SUPERHAWKES_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "superhawkes", version, about = "Learn superposed multivariate Hawkes processes")]
pub struct Cli {
    /// Seed for all randomness [default: 2018, or the experiment config's seed].
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Cap on worker threads [default: all cores].
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate event sequences from a model JSON file.
    Simulate(SimulateArgs),
    /// Learn a model from event sequences.
    Fit(FitArgs),
    /// Evaluate the excess-risk bounds and the superposition condition.
    #[command(allow_negative_numbers = true)]
    BoundCheck(BoundArgs),
    /// Run the synthetic strategy comparison.
    Experiment(ExperimentArgs),
    /// Run the cold-start recommendation pipeline on a ratings CSV.
    Recommend(RecommendArgs),
    /// Write a synthetic ratings CSV for the recommendation pipeline.
    SynthRatings(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Branching,
    Thinning,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Model JSON with fields `D`, `w`, `mu` and row-major `A`.
    #[arg(long)]
    pub model: PathBuf,
    /// Horizon of every sequence.
    #[arg(long = "T", alias = "horizon")]
    pub horizon: f64,
    #[arg(long, default_value_t = 1)]
    pub num_seqs: usize,
    #[arg(long, value_enum, default_value_t = Method::Branching)]
    pub method: Method,
    /// Source tag written for every sequence.
    #[arg(long, default_value_t = 0)]
    pub source: u64,
    /// Event CSV; the sidecar JSON is written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitStrategy {
    /// One process with a single exogenous rate.
    Single,
    /// One exogenous rate per source, shared infectivity.
    Multi,
    /// Superpose one sequence of every source per group.
    Super,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitEstimator {
    Ls,
    Mle,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Event CSV with sidecar; repeat to combine files.
    #[arg(long, required = true)]
    pub data: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = FitStrategy::Single)]
    pub strategy: FitStrategy,
    #[arg(long, value_enum, default_value_t = FitEstimator::Ls)]
    pub estimator: FitEstimator,
    /// Kernel decay.
    #[arg(long, default_value_t = 1.0)]
    pub w: f64,
    /// Solve without the nonnegativity constraint (least squares only).
    #[arg(long)]
    pub unconstrained: bool,
    #[arg(long, default_value_t = 5000)]
    pub max_iters: usize,
    /// Output model JSON; diagnostics go to `<out>.diagnostics.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    /// Bound on the squared norm of every exogenous vector.
    #[arg(long = "B-mu", alias = "b-mu", required_unless_present = "mus", conflicts_with = "mus")]
    pub b_mu: Option<f64>,
    /// Bound on the squared norm of the infectivity matrix.
    #[arg(long = "B-A", alias = "b-a", default_value_t = 0.0)]
    pub b_a: f64,
    /// Bound on the squared norm of the summed exogenous vector.
    #[arg(long = "B-sigma-mu", alias = "b-sigma-mu", required_unless_present = "mus", conflicts_with = "mus")]
    pub b_sigma_mu: Option<f64>,
    /// JSON array of exogenous vectors; sets B_mu, B_sigma_mu, D and M.
    #[arg(long)]
    pub mus: Option<PathBuf>,
    #[arg(long = "D", alias = "dim", required_unless_present = "mus")]
    pub dim: Option<usize>,
    #[arg(long = "M", alias = "sources", required_unless_present = "mus")]
    pub sources: Option<usize>,
    /// Events per sequence.
    #[arg(long = "I", alias = "events")]
    pub events: usize,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Experiment config JSON; omitted fields take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, env = OUT_DIR_ENV)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RecommendArgs {
    /// Ratings CSV with columns user,item,rating,timestamp.
    #[arg(long)]
    pub ratings: PathBuf,
    #[arg(long, default_value_t = 40)]
    pub min_item_ratings: usize,
    #[arg(long, default_value_t = 1)]
    pub min_train_events: usize,
    #[arg(long, default_value_t = 3)]
    pub max_train_events: usize,
    #[arg(long, default_value_t = 4)]
    pub min_rating: u8,
    /// First training day (YYYY-MM-DD).
    #[arg(long, default_value = "2014-01-01")]
    pub train_start: String,
    /// End of training, exclusive; also the query time.
    #[arg(long, default_value = "2014-04-01")]
    pub train_end: String,
    #[arg(long, default_value = "2014-04-01")]
    pub test_start: String,
    /// End of the test window, exclusive.
    #[arg(long, default_value = "2014-08-01")]
    pub test_end: String,
    /// Kernel decay per day.
    #[arg(long, default_value_t = 1.0)]
    pub w: f64,
    #[arg(long, default_value_t = 20)]
    pub group_size: usize,
    /// List lengths to evaluate.
    #[arg(long = "N", alias = "n", value_delimiter = ',', default_value = "5,10,20")]
    pub ns: Vec<usize>,
    /// Allow items from a user's history in their list.
    #[arg(long)]
    pub include_bought: bool,
    #[arg(long, env = OUT_DIR_ENV)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 2000)]
    pub users: usize,
    #[arg(long, default_value_t = 60)]
    pub items: usize,
    #[arg(long, default_value_t = 6)]
    pub clusters: usize,
    #[arg(long)]
    pub out: PathBuf,
}

/// An error in how the tool was invoked, as opposed to in the data.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<superhawkes::Error>() {
            return if e.is_data_error() { 2 } else { 3 };
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure thread pool: {e}");
            return ExitCode::from(1);
        }
    }

    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
