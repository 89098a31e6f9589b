//! `hystkin` command-line pipeline: generate synthetic cycles, train the
//! three-curve model, select K, evaluate, invert targets and summarize.

pub mod commands;
pub mod config;
pub mod error;
pub mod svg;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use error::{CliError, ErrorCode};

#[derive(Debug, Parser)]
#[command(name = "hystkin", version, about = "Hysteresis-compensated GMR kinematics pipeline")]
pub struct Cli {
    /// TOML file with default settings; command flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate reciprocating cycles on a backlash plant and write a dataset CSV.
    Generate(GenerateArgs),
    /// Fit the nominal, cw and ccw models and write a model bundle.
    Train(TrainArgs),
    /// Sweep K and write the BIC/AIC table and plot.
    #[command(name = "select-k")]
    SelectK(SelectKArgs),
    /// Compare nominal and direction-aware prediction on the test cycles.
    Evaluate(EvaluateArgs),
    /// Solve for the input that reaches each target angle.
    Invert(InvertArgs),
    /// Summarize an experiment directory, including tip error.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Plant preset: yaw-like or pitch-like.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub cycles: Option<usize>,
    /// Samples per reciprocating cycle (even).
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Measurement noise standard deviation, degrees.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Sweep amplitude in normalized input units.
    #[arg(long)]
    pub amplitude: Option<f64>,
    /// Run one unrecorded half-sweep first to leave the reset state.
    #[arg(long)]
    pub discard_transient: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub train_cycles: Option<usize>,
    /// Components for nominal, cw and ccw (one value applies to all three).
    #[arg(long, num_args = 1..=3)]
    pub k: Option<Vec<usize>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Solver tolerance stored with the bundle, degrees.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub q_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub q_max: Option<f64>,
    /// Output directory for the bundle.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SelectKArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Use only the first N cycles.
    #[arg(long)]
    pub train_cycles: Option<usize>,
    #[arg(long)]
    pub k_min: Option<usize>,
    #[arg(long)]
    pub k_max: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, allow_hyphen_values = true)]
    pub q_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub q_max: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Cycles used for training; the rest are evaluated.
    #[arg(long)]
    pub train_cycles: Option<usize>,
    #[arg(long)]
    pub model: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct InvertArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// File with one target angle per line.
    #[arg(long)]
    pub targets: Option<PathBuf>,
    /// Target angle; repeatable.
    #[arg(long = "target", allow_hyphen_values = true)]
    pub target: Vec<f64>,
    /// Starting input of the actuator.
    #[arg(long, allow_hyphen_values = true)]
    pub q_prev: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Output CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory holding results.csv from `evaluate`.
    #[arg(long)]
    pub dir: PathBuf,
    /// Model bundle whose fit report is appended.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub arm_length_mm: Option<f64>,
    /// Output file; defaults to report.txt inside --dir.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return Ok(());
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            return Err(CliError::config(first.to_string()));
        }
    };
    let file = match &cli.config {
        Some(path) => config::FileConfig::load(path)?,
        None => config::FileConfig::default(),
    };
    match cli.command {
        Command::Generate(a) => commands::generate(&a, &file),
        Command::Train(a) => commands::train(&a, &file),
        Command::SelectK(a) => commands::select_k(&a, &file),
        Command::Evaluate(a) => commands::evaluate(&a, &file),
        Command::Invert(a) => commands::invert(&a, &file),
        Command::Report(a) => commands::report(&a, &file),
    }
}

/// Configures stderr logging from `HYSTKIN_LOG` (`quiet`, `info`, `debug`;
/// unset means warnings only).
pub fn init_logging() -> Result<(), CliError> {
    let level = match std::env::var("HYSTKIN_LOG").ok().as_deref() {
        None | Some("") => log::LevelFilter::Warn,
        Some("quiet") => log::LevelFilter::Off,
        Some("info") => log::LevelFilter::Info,
        Some("debug") => log::LevelFilter::Debug,
        Some(other) => {
            return Err(CliError::config(format!("HYSTKIN_LOG must be quiet, info or debug, got {other:?}")))
        }
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .try_init()
        .ok();
    Ok(())
}
