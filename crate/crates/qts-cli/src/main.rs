//! qts — qubit tunneling spectroscopy simulator.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 numerical
//! failure (an eigensolve, quadrature, or integrator that did not converge).

// validation guards are written `!(x > 0.0)` on purpose: unlike `x <= 0.0`
// the negated form also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Command, OutFormat, Overrides};
use error::CliError;

#[derive(Parser)]
#[command(
    name = "qts",
    version,
    about = "Qubit tunneling spectroscopy: spectra, kink tomography sweeps, \
             and escape dynamics"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Diagonalize the source system and list the retained levels.
    Spectrum(RunArgs),
    /// Scan the probe bias per kink position and reconstruct amplitudes.
    Sweep(RunArgs),
    /// Integrate the population master equation at fixed bias.
    Evolve(RunArgs),
    /// Check a configuration and print the resolved plan without running.
    Validate(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to a TOML run configuration.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Built-in parameter set: fig3, fig4, or smoke.
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Output directory (overrides the config).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads for the sweep columns (default: all cores).
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    /// Eigensolver seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Output format (overrides the config).
    #[arg(long, value_enum)]
    format: Option<OutFormat>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (command, args) = match cli.cmd {
        Sub::Spectrum(a) => (Command::Spectrum, a),
        Sub::Sweep(a) => (Command::Sweep, a),
        Sub::Evolve(a) => (Command::Evolve, a),
        Sub::Validate(a) => (Command::Validate, a),
    };
    let text = match (&args.config, &args.preset) {
        (Some(_), Some(_)) => {
            return Err(CliError::Validation(
                "--config and --preset are mutually exclusive".into(),
            ))
        }
        (Some(path), None) => std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("read {}: {e}", path.display())))?,
        (None, Some(name)) => config::preset(name)
            .ok_or_else(|| {
                CliError::Validation(format!(
                    "unknown preset '{name}'; available: fig3, fig4, smoke"
                ))
            })?
            .to_string(),
        (None, None) => {
            return Err(CliError::Validation(
                "one of --config or --preset is required".into(),
            ))
        }
    };
    if let Some(t) = args.threads {
        if t == 0 {
            return Err(CliError::Validation("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Validation(format!("thread pool: {e}")))?;
    }
    let cfg = config::parse(&text)?;
    let plan = cfg.plan(
        command,
        &Overrides {
            seed: args.seed,
            out: args.out.clone(),
            format: args.format,
        },
    )?;
    commands::run(&plan)
}
