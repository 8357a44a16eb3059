//! `exsel`: run exclusive-selection algorithms on the simulator, check
//! their traces, and measure step counts.

mod commands;
mod output;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(
    name = "exsel",
    version,
    about = "Exclusive selection in simulated asynchronous shared memory"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Seed for schedules, crash plans and original names.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Directory for output files (JSON, CSV, traces, graphs).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Print JSON on stdout instead of a summary.
    #[arg(long, global = true)]
    pub json: bool,
    /// Expander constant profile: `scaled` or `paper`.
    #[arg(long, global = true)]
    pub profile: Option<String>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run one renaming execution.
    Rename(RenameArgs),
    /// Enumerate every interleaving of a small system and check it.
    Explore(ExploreArgs),
    /// Build, verify, or match on lossless expanders.
    Expander {
        #[command(subcommand)]
        command: ExpanderCommand,
    },
    /// Run a store&collect script.
    CollectDemo(CollectArgs),
    /// Run a repository or unbounded naming to quiescence.
    Repository(RepositoryArgs),
    /// Run an experiment grid from a JSON config.
    Bench(BenchArgs),
    /// Check a JSON-lines trace against an invariant suite.
    Check(CheckArgs),
}

#[derive(Args, Debug)]
pub struct RenameArgs {
    #[arg(long)]
    pub algo: String,
    #[arg(long)]
    pub k: u64,
    #[arg(long = "N", default_value_t = 64)]
    pub n_names: u64,
    /// `random` or `round-robin`.
    #[arg(long, default_value = "random")]
    pub scheduler: String,
    /// Schedule script (`A <slot>` / `X <slot>` lines); overrides the scheduler.
    #[arg(long)]
    pub schedule: Option<PathBuf>,
    /// Crashes are drawn from `0..=crashes`.
    #[arg(long, default_value_t = 0)]
    pub crashes: u64,
    /// Crashes strike within this many events.
    #[arg(long, default_value_t = 40)]
    pub crash_horizon: u64,
}

#[derive(Args, Debug)]
pub struct ExploreArgs {
    /// A renaming algorithm, or `selfish`, `altruistic`, `naming`.
    #[arg(long)]
    pub algo: String,
    /// Contenders (renaming) or processes (repository).
    #[arg(long, default_value_t = 2)]
    pub k: u64,
    #[arg(long = "N", default_value_t = 64)]
    pub n_names: u64,
    /// Events per process.
    #[arg(long, default_value_t = 6)]
    pub step_bound: u64,
    #[arg(long, default_value_t = 0)]
    pub crash_budget: u32,
    /// Requests per process for repository algorithms.
    #[arg(long, default_value_t = 2)]
    pub requests: u64,
}

#[derive(Subcommand, Debug)]
pub enum ExpanderCommand {
    /// Build and certify a graph.
    Build {
        #[arg(long)]
        v: usize,
        #[arg(long)]
        l: usize,
        /// Left degree; with `--w`, overrides the profile constants.
        #[arg(long, requires = "w")]
        delta: Option<usize>,
        #[arg(long, requires = "delta")]
        w: Option<usize>,
        #[arg(long)]
        attempts: Option<u32>,
        #[command(flatten)]
        mode: ModeArgs,
    },
    /// Certify a graph file.
    Verify {
        #[arg(long)]
        graph: PathBuf,
        #[command(flatten)]
        mode: ModeArgs,
    },
    /// Unique-neighbor matching of a subset of inputs.
    Matching {
        #[arg(long)]
        graph: PathBuf,
        /// Comma-separated input indices, starting at 0.
        #[arg(long)]
        subset: String,
    },
}

#[derive(Args, Debug, Clone, Copy)]
pub struct ModeArgs {
    /// Check every subset of size at most L (default).
    #[arg(long, conflicts_with = "sampled")]
    pub exact: bool,
    /// Check this many random subsets instead.
    #[arg(long)]
    pub sampled: Option<u64>,
}

#[derive(Args, Debug)]
pub struct CollectArgs {
    /// Renaming backend used to acquire store registers.
    #[arg(long, default_value = "adaptive")]
    pub backend: String,
    #[arg(long)]
    pub k: u64,
    #[arg(long = "N", default_value_t = 64)]
    pub n_names: u64,
    /// Script file, or an inline script such as `S 1 5; C 2`.
    #[arg(long)]
    pub ops: String,
    /// `sequential` (script order) or `random`.
    #[arg(long, default_value = "sequential")]
    pub scheduler: String,
}

#[derive(Args, Debug)]
pub struct RepositoryArgs {
    #[arg(long)]
    pub algo: String,
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    /// Requests per process, or a file with one line of values per process.
    #[arg(long, default_value = "100")]
    pub deposits: String,
    /// Crash plan: `<events> <slot>` lines.
    #[arg(long)]
    pub crash_script: Option<PathBuf>,
    /// `random` or `round-robin`.
    #[arg(long, default_value = "random")]
    pub scheduler: String,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    #[arg(long)]
    pub trace: PathBuf,
    #[arg(long, default_value = "all")]
    pub suite: String,
    /// JSON check context (register layout, op script).
    #[arg(long)]
    pub context: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
