//! Command-line front end for `forcebound`: scenario parsing, dispatch and
//! CSV/JSON output.

pub mod commands;
pub mod error;
pub mod grid;
pub mod scenario;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

pub use error::{CliError, CliResult};
pub use grid::GridSpec;
pub use scenario::Scenario;

pub const THREADS_ENV: &str = "FORCEBOUND_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "forcebound",
    version,
    about = "Force-estimation bounds for a damped quantum oscillator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Bounds for the scenario probe (CSV).
    Bound {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Sequential protocol and optimal probing time (CSV).
    Protocol {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Optimised ratio to the potential sensitivity over E (CSV).
    Figure2 {
        /// start:stop:points[,log|,lin]
        #[arg(long)]
        grid: Option<GridSpec>,
    },
    /// Monte Carlo estimation run (JSON).
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Stream raw samples to this CSV file.
        #[arg(long)]
        samples: Option<PathBuf>,
    },
    /// Identity suite (PASS/FAIL table).
    Validate,
}

fn emit(out: Option<&Path>, content: &str) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| CliError::io(format!("writing {}", path.display()), e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(content.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::io("writing stdout", e))
        }
    }
}

/// Run one command.
pub fn run(cli: &Cli) -> CliResult<()> {
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Bound { scenario } => emit(out, &commands::cmd_bound(&Scenario::load(scenario)?)?),
        Command::Protocol { scenario } => {
            emit(out, &commands::cmd_protocol(&Scenario::load(scenario)?)?)
        }
        Command::Figure2 { grid } => emit(
            out,
            &commands::cmd_figure2(&grid.unwrap_or(GridSpec::FIGURE2_DEFAULT))?,
        ),
        Command::Simulate {
            scenario,
            seed,
            samples,
        } => {
            let output =
                commands::cmd_simulate(&Scenario::load(scenario)?, *seed, samples.as_deref())?;
            emit(out, &commands::simulate_json(&output)?)
        }
        Command::Validate => {
            let (table, passed) = commands::cmd_validate()?;
            emit(out, &table)?;
            if passed {
                Ok(())
            } else {
                Err(CliError::Validation("identity suite reported FAIL".into()))
            }
        }
    }
}

/// Thread count from `FORCEBOUND_THREADS`, if set.
pub fn threads_from_env() -> CliResult<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(CliError::Config(format!(
                "{THREADS_ENV} must be a positive integer, got '{s}'"
            ))),
        },
    }
}

/// [`run`] inside a pool of `threads` workers (rayon's default when `None`).
pub fn run_with_threads(cli: &Cli, threads: Option<usize>) -> CliResult<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Config(format!("cannot start thread pool: {e}")))?;
    pool.install(|| run(cli))
}
