//! `gaussrd`: bounds, sum rates and matching checks for distributed
//! Gaussian source coding, driven by JSON problem files.
//!
//! Exit status is 0 on success, 2 for unusable input and 3 when the
//! parameters are valid but infeasible.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use output::Format;

#[derive(Parser, Debug)]
#[command(name = "gaussrd", version, about = "Rate-distortion bounds for distributed Gaussian source coding")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Problem file (JSON).
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Write results here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Tolerance override: audit slack for `region`, optimizer step for `sumrate`.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Subset bounds of the inner or outer region at fixed auxiliary rates.
    Region(commands::RegionArgs),
    /// Lower and upper sum-rate bounds of a multiterminal problem.
    Sumrate(commands::SumrateArgs),
    /// Matching-condition thresholds and an optional grid check.
    Match(commands::MatchArgs),
    /// Water-filling over eigenvalue floors.
    Waterfill(commands::WaterfillArgs),
    /// Equivalent remote problem of a multiterminal problem.
    Transform(commands::TransformArgs),
    /// Sum rate of a cyclic-shift-invariant source.
    Cyclic(commands::CyclicArgs),
    /// Two-terminal closed forms.
    Twoterm(commands::TwotermArgs),
}

#[derive(Debug)]
pub enum CliError {
    BadInput(String),
    Infeasible(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::BadInput(_) | CliError::Io(_) => 2,
            CliError::Infeasible(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::BadInput(m) => write!(f, "bad input: {m}"),
            CliError::Infeasible(m) => write!(f, "infeasible: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<gaussrd::Error> for CliError {
    fn from(e: gaussrd::Error) -> Self {
        use gaussrd::Error::*;
        match e {
            InfeasibleBudget { .. } | InfeasibleDistortion(_) | NotShiftInvariant { .. } => {
                CliError::Infeasible(e.to_string())
            }
            _ => CliError::BadInput(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = commands::run(&cli.global, &cli.command)
        .and_then(|report| report.write(cli.global.format, cli.global.output.as_deref()));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gaussrd: {e}");
            ExitCode::from(e.code())
        }
    }
}
