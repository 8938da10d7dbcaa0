use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use offbias::{QualityFunction, Timestamp};

#[derive(Debug, Parser)]
#[command(
    name = "offbias",
    version,
    about = "Offline recommender evaluation with feedback-loop debiasing"
)]
pub struct Cli {
    /// Cap on worker threads; results do not depend on it.
    #[arg(long, global = true, value_name = "N", value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: Option<u16>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score a constant recommender on one snapshot; prints JSON.
    Eval(EvalArgs),
    /// Score a constant recommender over a range of snapshots; writes CSV.
    Timeline(TimelineArgs),
    /// Fit item weights so the t1 marginal matches the t0 marginal.
    Optimize(OptimizeArgs),
    /// Generate a synthetic interaction log from a scenario.
    Simulate(SimulateArgs),
    /// Print snapshot statistics as JSON.
    Stats(StatsArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Quality {
    Hit,
    Invrank,
}

impl From<Quality> for QualityFunction {
    fn from(q: Quality) -> Self {
        match q {
            Quality::Hit => QualityFunction::HitInTopK,
            Quality::Invrank => QualityFunction::InverseRank,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Exhaustive,
    Stochastic,
}

/// Options shared by `eval` and `timeline`.
#[derive(Debug, Args)]
pub struct ScoringArgs {
    /// Interaction log (CSV, or JSONL for .jsonl/.ndjson).
    #[arg(long, value_name = "PATH")]
    pub log: PathBuf,
    /// Items of the constant recommender. Defaults to the k most-held items.
    #[arg(long, value_name = "ITEMS", value_delimiter = ',')]
    pub recommend: Vec<String>,
    /// Number of recommended items kept.
    #[arg(long, value_name = "N", default_value_t = 5, value_parser = clap::value_parser!(u32).range(1..))]
    pub k: u32,
    #[arg(long, value_enum, default_value_t = Quality::Hit)]
    pub quality: Quality,
    #[arg(long, value_enum, default_value_t = Mode::Exhaustive)]
    pub mode: Mode,
    /// Sampled (user, item) pairs; required in stochastic mode.
    #[arg(long, value_name = "N", value_parser = clap::value_parser!(u64).range(1..))]
    pub draws: Option<u64>,
    #[arg(long, value_name = "S", default_value_t = 0)]
    pub seed: u64,
    /// Item weights CSV (`item_id,weight`); missing items weigh 1.
    #[arg(long, value_name = "PATH")]
    pub weights: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub scoring: ScoringArgs,
    /// Snapshot time. Defaults to the last timestamp in the log.
    #[arg(long, value_name = "T")]
    pub at: Option<Timestamp>,
}

#[derive(Debug, Args)]
pub struct TimelineArgs {
    #[command(flatten)]
    pub scoring: ScoringArgs,
    /// First snapshot time.
    #[arg(long, value_name = "T", conflicts_with = "times")]
    pub from: Option<Timestamp>,
    /// Last snapshot time (inclusive).
    #[arg(long, value_name = "T", conflicts_with = "times")]
    pub to: Option<Timestamp>,
    #[arg(long, value_name = "N", default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..))]
    pub step: u32,
    /// Explicit snapshot times, strictly increasing.
    #[arg(long, value_name = "T,...", value_delimiter = ',')]
    pub times: Vec<Timestamp>,
    /// Series CSV (`time,score,std_error,pairs`).
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Also render the series as an SVG chart.
    #[arg(long, value_name = "PATH")]
    pub svg: Option<PathBuf>,
    /// Earlier series CSVs drawn in the same chart, after this one.
    #[arg(long, value_name = "PATH", requires = "svg")]
    pub overlay: Vec<PathBuf>,
    /// Manifest path. Defaults to `<out stem>.manifest.json`.
    #[arg(long, value_name = "PATH")]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long, value_name = "PATH")]
    pub log: PathBuf,
    /// Reference time whose marginal is the target.
    #[arg(long, value_name = "T")]
    pub t0: Timestamp,
    /// Drifted time whose weights are fitted.
    #[arg(long, value_name = "T")]
    pub t1: Timestamp,
    /// Number of active weights.
    #[arg(long, value_name = "N", default_value_t = 20, value_parser = clap::value_parser!(u32).range(1..))]
    pub p: u32,
    #[arg(long, value_name = "N", default_value_t = 500)]
    pub max_iters: usize,
    /// Weights CSV.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Report JSON. Defaults to `<out stem>.report.json`.
    #[arg(long, value_name = "PATH")]
    pub report: Option<PathBuf>,
    /// Manifest path. Defaults to `<out stem>.manifest.json`.
    #[arg(long, value_name = "PATH")]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario JSON. Without it the built-in S1 scenario runs.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Override the population seed of the scenario.
    #[arg(long, value_name = "S")]
    pub seed: Option<u64>,
    /// Log CSV.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Manifest path. Defaults to `<out stem>.manifest.json`.
    #[arg(long, value_name = "PATH")]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long, value_name = "PATH")]
    pub log: PathBuf,
    /// Snapshot time. Defaults to the last timestamp in the log.
    #[arg(long, value_name = "T")]
    pub at: Option<Timestamp>,
}
