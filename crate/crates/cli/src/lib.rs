//! The `rrr` command line: closed-form analyses, quorum sweeps, network
//! simulations with or without an adversary, the selection-bias baseline
//! and offline chain verification.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{ConfigError, OutputConfig, RunConfig, SweepCase, SweepFile};

#[derive(Debug, Parser)]
#[command(name = "rrr", version, about = "Round-robin consensus simulator and analysis toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate one closed-form probability or the throughput estimate.
    #[command(subcommand)]
    Analyze(Analyze),
    /// Sweep the quorum size and report the recommended value per case.
    Sweep(SweepArgs),
    /// Run a network simulation from a JSON config.
    Simulate(RunArgs),
    /// As `simulate`, but an adversary strategy is required.
    Attack(RunArgs),
    /// Monte Carlo of the priority-selection bias baseline.
    BiasDemo(BiasArgs),
    /// Verify a saved chain dump from genesis.
    Verify {
        /// Directory written by `simulate` with `output.dump` set.
        dir: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum Analyze {
    /// Benign fork sampling in one round.
    PrBfs(TailArgs),
    /// Adversarial fork sampling at a depth over a seed-schedule tree.
    PrAfs {
        #[command(flatten)]
        tail: TailArgs,
        #[arg(long)]
        depth: u32,
        #[arg(long, default_value_t = 80.0)]
        log2_leaves: f64,
    },
    /// Benign liveness violation.
    PrBlv {
        #[arg(long)]
        ne: u32,
        #[arg(long)]
        q: u32,
        #[arg(long)]
        beta: f64,
    },
    /// Adversarial liveness violation.
    PrAlv(TailArgs),
    /// Adversary never sampled as an endorser of an honest enrollment.
    PrAe {
        #[arg(long)]
        ne: f64,
        #[arg(long)]
        na: f64,
        #[arg(long)]
        ta: f64,
        #[arg(long)]
        alpha: f64,
    },
    /// Transactions per second for a block size and round duration.
    Throughput(ThroughputArgs),
}

#[derive(Debug, Args)]
pub struct TailArgs {
    #[arg(long)]
    pub ne: u32,
    #[arg(long)]
    pub q: u32,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub beta: f64,
}

#[derive(Debug, Args)]
pub struct ThroughputArgs {
    /// Round duration in seconds.
    #[arg(long)]
    pub tr: f64,
    /// Block size in bytes.
    #[arg(long)]
    pub block: f64,
    #[arg(long)]
    pub ne: f64,
    /// Transaction size in bytes.
    #[arg(long)]
    pub tx: f64,
    #[arg(long, default_value_t = 280.0)]
    pub header: f64,
    #[arg(long, default_value_t = 416.0)]
    pub confirm_bytes: f64,
    /// Enrollments carried per block.
    #[arg(long, default_value_t = 0.0)]
    pub enrolls: f64,
    #[arg(long, default_value_t = 512.0)]
    pub enroll_bytes: f64,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// JSON file holding `{"cases": [...]}`. Without it the flags describe
    /// a single case.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub ne: Option<u32>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub depth: Option<u32>,
    /// Consecutive rounds for the liveness column.
    #[arg(long)]
    pub s: Option<u32>,
    #[arg(long)]
    pub q_min: Option<u32>,
    #[arg(long)]
    pub q_max: Option<u32>,
    #[arg(long)]
    pub log2_leaves: Option<f64>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON run config; every field is optional.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub rounds: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub nodes: Option<u32>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Strategy kind with default settings, e.g. `withhold-confirm`.
    #[arg(long)]
    pub strategy: Option<String>,
    /// Output directory; overrides the config.
    #[arg(long, env = "RRR_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
    /// Base name of the output files.
    #[arg(long)]
    pub name: Option<String>,
    /// Also save the observer's chain for `verify`.
    #[arg(long)]
    pub dump: bool,
}

#[derive(Debug, Args)]
pub struct BiasArgs {
    #[arg(long, default_value_t = 0.33)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1000)]
    pub initial: u64,
    #[arg(long, default_value_t = 10000)]
    pub r#final: u64,
    #[arg(long, default_value_t = 20)]
    pub runs: u32,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// The adversary selects like everyone else.
    #[arg(long)]
    pub control: bool,
    /// Blocks per point of the block-share estimate.
    #[arg(long)]
    pub window: Option<u64>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Runs one command. `Ok(false)` means it completed with a negative verdict,
/// such as a chain that fails verification.
pub fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Analyze(a) => commands::analyze(a).map(|()| true),
        Command::Sweep(a) => commands::sweep(a).map(|()| true),
        Command::Simulate(a) => commands::simulate(a, false).map(|()| true),
        Command::Attack(a) => commands::simulate(a, true).map(|()| true),
        Command::BiasDemo(a) => commands::bias_demo(a).map(|()| true),
        Command::Verify { dir } => commands::verify(&dir),
    }
}
