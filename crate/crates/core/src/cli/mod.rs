//! Batch experiment runner behind the `fedmask` binary.
//!
//! Exit codes: 0 success, 1 failed check or runtime error, 2 usage or schema
//! error, 3 aborted aggregation round, 4 missing or unreadable checkpoint.

mod commands;
mod output;
mod scenario;

pub use commands::{parse_colluders, run};
pub use output::{write_atomic, write_metrics_csv, MetricsRow};
pub use scenario::{env_seed, DataSection, DistillSection, LatencySpec, ScenarioFile, SEED_ENV};

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::analysis::AnalysisError;
use crate::federation::FedError;
use crate::model::ModelError;
use crate::protocols::ProtocolKind;
use crate::simnet::SimError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Schema(String),
    #[error("checkpoint {0}: {1}")]
    Checkpoint(PathBuf, String),
    #[error(transparent)]
    Fed(#[from] FedError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema(_) => 2,
            CliError::Checkpoint(..) => 4,
            CliError::Fed(e) if e.is_round_aborted() => 3,
            _ => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Fed(e.into())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Schema(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "fedmask", version, about = "Secure aggregation and two-phase federated training over a simulated network")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Full-network training with securely summed gradients.
    InitTrain(InitTrainArgs),
    /// Head-only training over a frozen base checkpoint.
    EdgeTrain(EdgeTrainArgs),
    /// Message counts and critical-path latency of every protocol.
    ProtocolBench(BenchArgs),
    /// Monte Carlo collusion attack against one victim.
    Collusion(CollusionArgs),
    /// Rounds to reach a validation-loss threshold for several local-update counts.
    SweepLocalUpdates(SweepArgs),
}

#[derive(Debug, Args)]
pub struct SeedArg {
    /// Master seed; falls back to the scenario's `seed`, then FEDMASK_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct InitTrainArgs {
    /// Scenario JSON file.
    pub scenario: PathBuf,
    /// Output directory for model.ckpt, metrics.csv and transcript.jsonl.
    #[arg(long, short)]
    pub out: PathBuf,
    #[command(flatten)]
    pub seed: SeedArg,
}

#[derive(Debug, Args)]
pub struct EdgeTrainArgs {
    pub scenario: PathBuf,
    /// Checkpoint whose base is frozen, encoded for the scenario's `model`.
    #[arg(long)]
    pub base: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
    /// Distill the checkpoint's base into the scenario's `student` first.
    #[arg(long)]
    pub distill: bool,
    /// Fine-tune the global head per party and append `p<j>` rows to metrics.csv.
    #[arg(long)]
    pub personalize: bool,
    #[command(flatten)]
    pub seed: SeedArg,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Party counts.
    #[arg(long, value_delimiter = ',', default_values_t = [3usize, 5, 10])]
    pub n: Vec<usize>,
    /// Neighbor count for masking and Shamir threshold.
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// Elements per secret vector.
    #[arg(long, default_value_t = 100)]
    pub dim: usize,
    /// `auto` (geographic preset for 3, 5 and 10 parties), `random`, or a preset name.
    #[arg(long, default_value = "auto")]
    pub latency: String,
    /// Latency matrices per party count; all but the first are random.
    #[arg(long, default_value_t = 100)]
    pub matrices: usize,
    /// Also write the report as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
    #[command(flatten)]
    pub seed: SeedArg,
}

#[derive(Debug, Args)]
pub struct CollusionArgs {
    #[arg(long, value_enum)]
    pub protocol: ProtocolArg,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// Comma-separated party ids plus `m` for the mediator, or `neighbors`
    /// (the victim's full neighborhood) and `neighbors-1` (all but one).
    #[arg(long, allow_hyphen_values = true)]
    pub colluders: String,
    #[arg(long, default_value_t = 0)]
    pub victim: usize,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    #[arg(long)]
    pub json: Option<PathBuf>,
    #[command(flatten)]
    pub seed: SeedArg,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum ProtocolArg {
    Nosmc,
    Stsmc,
    Shamir,
    Masked,
}

impl From<ProtocolArg> for ProtocolKind {
    fn from(p: ProtocolArg) -> Self {
        match p {
            ProtocolArg::Nosmc => ProtocolKind::Nosmc,
            ProtocolArg::Stsmc => ProtocolKind::Stsmc,
            ProtocolArg::Shamir => ProtocolKind::Shamir,
            ProtocolArg::Masked => ProtocolKind::Masked,
        }
    }
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    pub scenario: PathBuf,
    /// Local-update counts.
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 5, 20])]
    pub e: Vec<usize>,
    /// Validation-loss threshold.
    #[arg(long)]
    pub threshold: f64,
    /// Number of seeds, starting at the master seed.
    #[arg(long, default_value_t = 10)]
    pub seeds: usize,
    /// Frozen base checkpoint; without it each seed uses a random base. The head
    /// is always freshly initialized.
    #[arg(long)]
    pub base: Option<PathBuf>,
    /// Output CSV with columns E, median_rounds, seeds.
    #[arg(long, short)]
    pub out: PathBuf,
    #[command(flatten)]
    pub seed: SeedArg,
}
