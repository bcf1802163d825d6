//! Flag definitions. Most fields are optional so that a key = value config
//! file can fill them in; flags always win. See [`crate::kv`].

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "continual", version, about = "Continual object recognition benchmark")]
pub struct Cli {
    /// Worker threads for parallel runs. Defaults to the CONTINUAL_WORKERS
    /// environment variable, then to the available cores.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a synthetic feature stream to a file.
    Generate(GenerateArgs),
    /// Train one strategy under one scenario and write accuracy CSVs.
    Run(RunArgs),
    /// Sweep temporal fusion windows for a saved head.
    Fuse(FuseArgs),
    /// Sweep rejection thresholds for a saved head.
    Roc(RocArgs),
    /// Render aggregate CSVs as text tables and an optional SVG plot.
    Report(ReportArgs),
}

/// Synthetic stream shape; every field falls back to the config file, then
/// to the generator defaults.
#[derive(Args, Debug, Default)]
pub struct ShapeArgs {
    /// Number of object classes.
    #[arg(long)]
    pub classes: Option<usize>,
    /// Number of categories.
    #[arg(long)]
    pub categories: Option<usize>,
    /// Number of acquisition sessions.
    #[arg(long)]
    pub sessions: Option<usize>,
    /// Frames per (class, session) sequence.
    #[arg(long)]
    pub frames: Option<usize>,
    /// Feature dimensionality.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Standard deviation of class centers.
    #[arg(long)]
    pub center_scale: Option<f64>,
    /// Standard deviation of per-session offsets.
    #[arg(long)]
    pub session_scale: Option<f64>,
    /// Per-coordinate random walk step bound.
    #[arg(long)]
    pub walk_scale: Option<f64>,
    /// Standard deviation of per-frame noise.
    #[arg(long)]
    pub noise_scale: Option<f64>,
    /// Generator seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Where a command reads its dataset from.
#[derive(Args, Debug, Default)]
pub struct DataArgs {
    /// Load features from a file instead of generating them.
    #[arg(long, conflicts_with = "synthetic")]
    pub data: Option<PathBuf>,
    /// Generate the synthetic stream in memory.
    #[arg(long)]
    pub synthetic: bool,
    #[command(flatten)]
    pub shape: ShapeArgs,
    /// Comma-separated list of held-out test sessions (default 3,7,10).
    #[arg(long)]
    pub test_sessions: Option<String>,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    /// key = value file supplying defaults for any missing flag.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub shape: ShapeArgs,
    /// Output feature file path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    /// key = value file supplying defaults for any missing flag.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Scenario: ni, nc or nic.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Strategy: naive, cumulative, cwr, cw or fw.
    #[arg(long)]
    pub strategy: Option<String>,
    /// Evaluation protocol: full, partial or reject.
    #[arg(long)]
    pub protocol: Option<String>,
    /// Rejection threshold for the reject protocol.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Evaluation level: object or category.
    #[arg(long)]
    pub level: Option<String>,
    /// Number of schedule shuffles to average over.
    #[arg(long)]
    pub runs: Option<usize>,
    /// Run count override for the cumulative strategy.
    #[arg(long)]
    pub cumulative_runs: Option<usize>,
    /// Base seed for schedule shuffling (run r uses seed + r).
    #[arg(long)]
    pub schedule_seed: Option<u64>,
    /// Base seed for head initialization and minibatch shuffling.
    #[arg(long)]
    pub train_seed: Option<u64>,
    /// SGD learning rate.
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// SGD epochs per batch.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Minibatch size.
    #[arg(long)]
    pub minibatch: Option<usize>,
    /// Weight initialization mean.
    #[arg(long)]
    pub init_mean: Option<f64>,
    /// Weight initialization standard deviation.
    #[arg(long)]
    pub init_std: Option<f64>,
    /// Early stopping patience in epochs; 0 disables early stopping.
    #[arg(long)]
    pub patience: Option<usize>,
    /// Fraction of each batch held out for early stopping.
    #[arg(long)]
    pub holdout: Option<f64>,
    #[command(flatten)]
    pub data: DataArgs,
    /// Output directory for runs.csv, aggregate.csv and head.txt.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FuseArgs {
    /// key = value file supplying defaults for any missing flag.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Head checkpoint written by run.
    #[arg(long)]
    pub head: Option<PathBuf>,
    #[command(flatten)]
    pub data: DataArgs,
    /// Comma-separated fusion window sizes, e.g. 1,10,50.
    #[arg(long)]
    pub windows: Option<String>,
    /// Window handling at sequence starts: on, off or both.
    #[arg(long)]
    pub reset: Option<String>,
    /// Output directory for fuse.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RocArgs {
    /// key = value file supplying defaults for any missing flag.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Head checkpoint written by run.
    #[arg(long)]
    pub head: Option<PathBuf>,
    #[command(flatten)]
    pub data: DataArgs,
    /// Comma-separated class ids treated as seen (default: all).
    #[arg(long)]
    pub seen: Option<String>,
    /// Comma-separated rejection thresholds (default 0,0.1,...,1).
    #[arg(long)]
    pub thresholds: Option<String>,
    /// Output directory for roc.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Aggregate CSV files to render.
    #[arg(long, required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    /// Write an SVG accuracy plot to this path.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}
