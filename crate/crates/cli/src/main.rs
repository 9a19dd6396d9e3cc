//! `wdro`: command-line front end for the Wasserstein DRO toolkit.
//!
//! Every subcommand reads one JSON config (or, for `calibrate`, plain flags),
//! echoes the resolved config next to its results, and writes JSON and/or CSV
//! into `--out`. Exit codes: 0 success, 1 invalid input, 2 numerical failure.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use wdro::WdroError;

use crate::commands::CalibrateFlags;

#[derive(Parser, Debug)]
#[command(
    name = "wdro",
    version,
    about = "Wasserstein distributionally robust evaluation, calibration and certification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Worst-case expected loss of a fixed loss over a Wasserstein ball.
    Eval(Common),
    /// Fit a robust newsvendor, linear predictor or portfolio.
    Solve(Common),
    /// Radius and residual from a calibration rule.
    Calibrate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        flags: CalibrateFlags,
    },
    /// Monte Carlo coverage experiment against a known distribution.
    Certify(Common),
    /// Rate function and tail bounds over a grid of deviations.
    RateFunction(Common),
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// JSON config file.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory; results go to stdout when absent.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Master seed. WDRO_SEED takes precedence when set.
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    /// Worker threads for certify (default: all cores).
    #[arg(long, value_name = "K")]
    pub jobs: Option<usize>,
    /// Overwrite existing output files.
    #[arg(long)]
    pub force: bool,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Log progress to stderr.
    #[arg(short, long)]
    pub verbose: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Both,
}

impl Format {
    pub fn json(self) -> bool {
        self != Format::Csv
    }

    pub fn csv(self) -> bool {
        self != Format::Json
    }
}

#[derive(Debug)]
pub enum CliError {
    Core(WdroError),
    Usage(String),
    OutputExists(PathBuf),
}

impl From<WdroError> for CliError {
    fn from(e: WdroError) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(WdroError::Io(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(WdroError::Json(e))
    }
}

impl CliError {
    fn name(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.name(),
            CliError::Usage(_) => "UsageError",
            CliError::OutputExists(_) => "OutputExists",
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Core(e) => e.to_string(),
            CliError::Usage(m) => m.clone(),
            CliError::OutputExists(p) => format!("{} exists; pass --force to overwrite", p.display()),
        }
    }
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: &'a str,
    message: String,
    exit_code: u8,
}

fn fail(err: &CliError) -> ExitCode {
    let code = err.exit_code();
    let report = ErrorReport {
        error: err.name(),
        message: err.message(),
        exit_code: code,
    };
    eprintln!("{}", serde_json::to_string(&report).expect("error report serializes"));
    ExitCode::from(code)
}

/// `WDRO_SEED` beats `--seed`, which beats the config.
pub fn seed_override(flag: Option<u64>) -> Result<Option<u64>, CliError> {
    match std::env::var("WDRO_SEED") {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("WDRO_SEED must be an unsigned 64-bit integer, got {v:?}"))),
        _ => Ok(flag),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Eval(c) => commands::eval(&c),
        Command::Solve(c) => commands::solve(&c),
        Command::Calibrate { common, flags } => commands::calibrate(&common, &flags),
        Command::Certify(c) => commands::certify(&c),
        Command::RateFunction(c) => commands::rate_function(&c),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            return fail(&CliError::Usage(e.to_string().trim_end().to_string()));
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}
