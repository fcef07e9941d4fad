mod config;
mod svg;
mod sweep;
mod verify;

use clap::{Parser, Subcommand};
use config::{CommonArgs, RunConfig};
use std::process::ExitCode;

/// Divergence and error sweeps for normalized sums of random-phase
/// narrowband waves in white Gaussian noise.
#[derive(Parser, Debug)]
#[command(name = "nbmmse", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Divergence D_N against the number of waves N (equal allocations).
    DSweep(CommonArgs),
    /// Causal and non-causal errors of tone sums and Gaussian sums against N.
    ErrorSweep(CommonArgs),
    /// Large-N error rates against their small-SNR predictions.
    Asymptotics(CommonArgs),
    /// Run the oracle and property checks and write a JSON report.
    Verify(CommonArgs),
}

/// Reasons for a nonzero exit.
#[derive(Debug)]
pub enum Failure {
    /// A verification check did not pass (exit 1).
    Verification(String),
    /// Bad input, I/O trouble or a numerical failure (exit 2).
    Numerical(String),
    /// A computed row broke an identity it must satisfy (exit 3).
    Identity(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Verification(_) => 1,
            Failure::Numerical(_) => 2,
            Failure::Identity(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Verification(m) | Failure::Numerical(m) | Failure::Identity(m) => m,
        }
    }
}

impl From<nbmmse::Error> for Failure {
    fn from(e: nbmmse::Error) -> Self {
        Failure::Numerical(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Numerical(format!("I/O error: {e}"))
    }
}

fn init_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("NBMMSE_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().map_err(|_| {
        Failure::Numerical(format!(
            "NBMMSE_THREADS must be a non-negative integer, got {raw:?}"
        ))
    })?;
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Failure::Numerical(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    init_threads()?;
    match cli.command {
        Command::DSweep(args) => {
            sweep::divergence_sweep(&RunConfig::resolve(config::Mode::DSweep, &args)?)
        }
        Command::ErrorSweep(args) => {
            sweep::error_sweep(&RunConfig::resolve(config::Mode::ErrorSweep, &args)?)
        }
        Command::Asymptotics(args) => {
            sweep::asymptotics(&RunConfig::resolve(config::Mode::Asymptotics, &args)?)
        }
        Command::Verify(args) => verify::run(&RunConfig::resolve(config::Mode::Verify, &args)?),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.exit_code())
        }
    }
}
