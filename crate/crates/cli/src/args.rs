use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use knnclutter::ScenarioId;

#[derive(Debug, Parser)]
#[command(
    name = "knnclutter",
    version,
    about = "Separate feature points from clutter with Kth nearest-neighbour distances",
    after_help = "Exit codes: 0 success, 2 usage, 3 input parse, 4 numeric failure, 5 I/O.\n\
                  KNNCLUTTER_THREADS caps the number of worker threads."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a benchmark scenario and write it as a pattern CSV.
    Simulate(SimulateArgs),
    /// Classify every point once, at a fixed or automatically chosen K.
    Classify(ClassifyArgs),
    /// Classify repeatedly until the overall entropy rises.
    Iterate(IterateArgs),
    /// Write the classification entropy for each candidate K.
    EntropyCurve(CurveArgs),
    /// Compare predicted labels with ground truth.
    Metrics(MetricsArgs),
    /// Run the Monte-Carlo benchmark described by a JSON config.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// 1, 2, 3, 4 or aggregate.
    #[arg(long)]
    pub scenario: ScenarioId,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct KChoice {
    /// Fixed neighbour order.
    #[arg(long)]
    pub k: Option<usize>,
    /// Choose K from the levelling-off point of the entropy curve.
    #[arg(long)]
    pub auto_k: bool,
}

/// Candidate neighbour orders. Defaults to 1..=35, clipped to n - 2.
#[derive(Debug, Args, Default)]
pub struct KSetArgs {
    #[arg(long, conflicts_with = "k_set")]
    pub k_min: Option<usize>,
    #[arg(long, conflicts_with = "k_set")]
    pub k_max: Option<usize>,
    /// Explicit comma-separated list, e.g. 2,4,8.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub k_set: Option<Vec<usize>>,
}

#[derive(Debug, Args, Default)]
pub struct EmArgs {
    /// Relative log-likelihood tolerance of EM.
    #[arg(long)]
    pub em_tol: Option<f64>,
    #[arg(long)]
    pub em_max_iter: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[command(flatten)]
    pub k: KChoice,
    #[command(flatten)]
    pub k_set: KSetArgs,
    #[command(flatten)]
    pub em: EmArgs,
    /// Labels CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON report; defaults to the labels path with a .json extension.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Record wall time in the report.
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct IterateArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[command(flatten)]
    pub k: KChoice,
    #[command(flatten)]
    pub k_set: KSetArgs,
    #[command(flatten)]
    pub em: EmArgs,
    #[arg(long, default_value_t = knnclutter::IterationConfig::DEFAULT_MAX_ITER)]
    pub max_iter: usize,
    /// Smallest pattern worth another iteration; defaults to max K + 2.
    #[arg(long)]
    pub min_points: Option<usize>,
    /// Output prefix: writes PREFIX_iterJ.csv, PREFIX_labels.csv and PREFIX_report.json.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[command(flatten)]
    pub k_set: KSetArgs,
    #[command(flatten)]
    pub em: EmArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Labels CSV with an is_feature or label column.
    #[arg(long)]
    pub pred: PathBuf,
    /// Pattern CSV with a label column.
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the config's replicates.
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Overrides the config's master seed.
    #[arg(long)]
    pub seed: Option<u64>,
}
