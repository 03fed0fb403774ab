//! `shapcal`: data valuation for KNN learning from the command line.
//!
//! Subcommands: `synth` and `split` prepare datasets, `value` computes
//! valuation vectors, `inflation` derives threshold and misidentification
//! metrics from bin-removal curves, `scenario` runs the mislabel / online /
//! active-learning pipelines, and `replay` re-executes a run from its report.
//!
//! Exit codes: 0 success, 2 usage error, 3 data or parse error, 4 numeric
//! failure (including replay mismatches).

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};

/// Error carrying the process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError {
            code: 3,
            message: message.into(),
        }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        CliError {
            code: 4,
            message: message.into(),
        }
    }
}

impl From<shapcal_core::Error> for CliError {
    fn from(err: shapcal_core::Error) -> Self {
        let code = match &err {
            shapcal_core::Error::Invalid(_) => 2,
            shapcal_core::Error::Io(_) | shapcal_core::Error::Parse { .. } => 3,
            shapcal_core::Error::NonFinite(_) => 4,
        };
        CliError {
            code,
            message: err.to_string(),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "shapcal",
    version,
    about = "KNN-Shapley and calibrated KNN-Shapley data valuation"
)]
struct Cli {
    /// Worker threads for parallel sections; identical output for any value.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic Gaussian-blob dataset as CSV.
    Synth(SynthArgs),
    /// Shuffle a CSV dataset into train/val/test files.
    Split(SplitArgs),
    /// Compute a valuation vector for a training set.
    Value(ValueArgs),
    /// Bin-removal curve plus threshold and misidentification metrics.
    Inflation(InflationArgs),
    /// Run a scenario pipeline from a JSON config.
    Scenario(ScenarioArgs),
    /// Re-execute a run from its report and verify the outputs match.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 2)]
    classes: usize,
    #[arg(long, default_value_t = 4.0)]
    separation: f64,
    #[arg(long, default_value_t = 1.0)]
    noise_std: f64,
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    input: PathBuf,
    /// Label column: header name, or 0-based index with --no-header.
    #[arg(long)]
    label: String,
    #[arg(long, action = ArgAction::SetTrue)]
    no_header: bool,
    /// Comma-separated train,val,test fractions summing to 1.
    #[arg(long, default_value = "0.8,0.1,0.1")]
    fractions: String,
    /// Downsample every class to the minority count before splitting.
    #[arg(long, action = ArgAction::SetTrue)]
    balance: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ValueArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    val: PathBuf,
    #[arg(long)]
    label: String,
    #[arg(long, action = ArgAction::SetTrue)]
    no_header: bool,
    /// Valuation method: exact, knn, or cknn.
    #[arg(long, default_value = "cknn")]
    method: String,
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Calibration tail size; defaults to N - 2K.
    #[arg(long)]
    t: Option<usize>,
    #[arg(long, default_value = "euclidean")]
    metric: String,
    /// Z-score features using training-set statistics.
    #[arg(long, action = ArgAction::SetTrue)]
    normalize: bool,
    /// Divide summed values by the validation-set size.
    #[arg(long, action = ArgAction::SetTrue)]
    mean_normalize: bool,
    /// Downsample every training class to the minority count.
    #[arg(long, action = ArgAction::SetTrue)]
    balance: bool,
    /// Also write the full neighbor rankings as CSV.
    #[arg(long, action = ArgAction::SetTrue)]
    dump_rankings: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct InflationArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    val: PathBuf,
    /// Held-out evaluation file; required with --eval-on-test.
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long)]
    label: String,
    #[arg(long, action = ArgAction::SetTrue)]
    no_header: bool,
    #[arg(long, default_value = "cknn")]
    method: String,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long)]
    t: Option<usize>,
    #[arg(long, default_value = "euclidean")]
    metric: String,
    #[arg(long, default_value_t = 100)]
    bins: usize,
    /// Evaluate removal accuracies on the test file instead of validation.
    #[arg(long, action = ArgAction::SetTrue)]
    eval_on_test: bool,
    #[arg(long, action = ArgAction::SetTrue)]
    normalize: bool,
    #[arg(long, action = ArgAction::SetTrue)]
    balance: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario kind: mislabel, online, or active.
    kind: String,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    t: Option<usize>,
    #[arg(long)]
    metric: Option<String>,
    /// Override the removal policy kind: negative or bottom.
    #[arg(long)]
    policy: Option<String>,
    #[arg(long)]
    q: Option<f64>,
    /// Strict zero comparison for negative-value removal.
    #[arg(long, action = ArgAction::SetTrue, conflicts_with = "inclusive")]
    strict: bool,
    /// Inclusive zero comparison for negative-value removal.
    #[arg(long, action = ArgAction::SetTrue)]
    inclusive: bool,
}

#[derive(Args)]
struct ReplayArgs {
    /// Report JSON produced by value, inflation, or scenario.
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
}

/// Seed resolution: the flag wins, then SHAPCAL_SEED, then zero.
fn resolve_seed(flag: Option<u64>) -> Result<u64, CliError> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var("SHAPCAL_SEED") {
        Ok(text) => text
            .parse::<u64>()
            .map_err(|_| CliError::usage(format!("SHAPCAL_SEED is not an integer: {text:?}"))),
        Err(_) => Ok(0),
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Synth(args) => commands::synth::run(args),
        Command::Split(args) => commands::split::run(args),
        Command::Value(args) => commands::value::run(args),
        Command::Inflation(args) => commands::inflation::run(args),
        Command::Scenario(args) => commands::scenario::run(args),
        Command::Replay(args) => commands::replay::run(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.threads {
        Some(threads) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads.max(1))
                .build();
            match pool {
                Ok(pool) => pool.install(|| dispatch(cli.command)),
                Err(e) => Err(CliError::usage(format!("cannot build thread pool: {e}"))),
            }
        }
        None => dispatch(cli.command),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message);
            ExitCode::from(err.code)
        }
    }
}
