//! `vesselkit classify|simulate|verify <config.json> [--out DIR] [--halving]`
//!
//! Exit codes: 0 ok, 1 checks failed or runtime failure, 2 config error,
//! 3 spectra of `A` and `−A_ζ` overlap, 4 more than half of the grid singular.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::CliError;
use output::json_text;

#[derive(Parser)]
#[command(name = "vesselkit", version, about = "Vessel classification, simulation and verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    config: PathBuf,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Rerun FD checks at dx/2, dt/2 and report error ratios.
    #[arg(long)]
    halving: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Reduce the parameter triple to canonical form.
    Classify { config: PathBuf },
    /// Evaluate observables on the grid and write CSV files.
    Simulate(RunArgs),
    /// Run residual checks and write a JSON report.
    Verify(RunArgs),
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("VESSELKIT_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("VESSELKIT_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Runtime(e.to_string()))
}

fn load(args: &RunArgs) -> Result<config::ExperimentConfig, CliError> {
    let mut cfg = commands::load(&args.config)?;
    if let Some(out) = cfg.output.as_mut() {
        if let Some(dir) = &args.out {
            out.dir = Some(dir.clone());
        }
    }
    if args.halving {
        cfg.halving = Some(true);
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    let report = match cli.command {
        Command::Classify { config } => commands::classify(&commands::load(&config)?)?,
        Command::Simulate(args) => commands::simulate(&load(&args)?)?,
        Command::Verify(args) => {
            let report = commands::verify(&load(&args)?)?;
            print!("{}", json_text(&report));
            if report["pass"] != serde_json::Value::Bool(true) {
                return Err(CliError::ChecksFailed);
            }
            return Ok(());
        }
    };
    print!("{}", json_text(&report));
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("vesselkit: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
