//! `bbsim`: synthesize, fit, simulate and compare equivalent-baseband
//! network models from the command line.
//!
//! Exit codes: 0 success (and `compare` under threshold), 1 `compare`
//! over threshold, 2 parse/config failures, 3 validation failures,
//! 4 numerical failures.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use config::RunConfig;

#[derive(Debug, Error)]
pub enum AppError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] bbsim_core::Error),
}

impl AppError {
    fn config(message: impl Into<String>) -> Self {
        AppError::Config(message.into())
    }

    /// Core validation raised while building types straight from config
    /// values is a config-level failure.
    fn config_from_core(err: bbsim_core::Error) -> Self {
        AppError::Config(err.to_string())
    }

    fn exit_code(&self) -> u8 {
        match self {
            AppError::Config(_) => 2,
            AppError::Core(bbsim_core::Error::Parse { .. }) => 2,
            AppError::Core(bbsim_core::Error::Io(_)) => 2,
            AppError::Core(bbsim_core::Error::Validation(_)) => 3,
            AppError::Core(bbsim_core::Error::Numerical(_)) => 4,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "bbsim",
    version,
    about = "Equivalent-baseband S-parameter fitting and transient simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration file (TOML)
    #[arg(long)]
    config: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the configured line cascade into a Touchstone file
    Synth {
        #[command(flatten)]
        common: Common,
    },
    /// Fit a discrete-time impulse response to tabulated S-data
    Fit {
        #[command(flatten)]
        common: Common,
        /// Input file (.sNp or .csv); defaults to paths.touchstone
        #[arg(long)]
        input: Option<PathBuf>,
        /// Port count when the file extension does not encode it
        #[arg(long)]
        ports: Option<usize>,
    },
    /// Run the transient solver from a tap file
    Sim {
        #[command(flatten)]
        common: Common,
        /// Tap file; defaults to paths.taps
        #[arg(long)]
        taps: Option<PathBuf>,
    },
    /// Compare a waveform against the analytic steady-state oracle
    Compare {
        #[command(flatten)]
        common: Common,
        /// Waveform CSV; defaults to paths.waveform
        #[arg(long)]
        waveform: Option<PathBuf>,
        /// Samples to discard before comparing; defaults to
        /// compare.warmup_steps (or 0)
        #[arg(long)]
        warmup: Option<usize>,
    },
}

fn dispatch(cli: Cli) -> Result<ExitCode, AppError> {
    match cli.command {
        Command::Synth { common } => {
            let config = RunConfig::load(&common.config)?;
            commands::cmd_synth(&config)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Fit {
            common,
            input,
            ports,
        } => {
            let config = RunConfig::load(&common.config)?;
            commands::cmd_fit(&config, input.as_ref(), ports)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Sim { common, taps } => {
            let config = RunConfig::load(&common.config)?;
            commands::cmd_sim(&config, taps.as_ref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare {
            common,
            waveform,
            warmup,
        } => {
            let config = RunConfig::load(&common.config)?;
            let passed = commands::cmd_compare(&config, waveform.as_ref(), warmup)?;
            Ok(if passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
