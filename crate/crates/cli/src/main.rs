//! `heatbv`: run heat-kernel functional experiments from config files.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod report;
mod runner;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use config::ExperimentConfig;

/// Exit code when a run completes but a verdict fails.
const EXIT_VERDICT_FAILED: u8 = 2;

#[derive(Parser)]
#[command(name = "heatbv", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run { config: PathBuf },
    /// Summarise every verdict.json below a directory.
    Report { dir: PathBuf },
    /// Validate the heat kernel of a config's geometry and engine.
    ValidateKernel { config: PathBuf },
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("HEATBV_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .with_context(|| format!("HEATBV_THREADS={v:?} is not a thread count"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<bool> {
    init_threads()?;
    match cli.command {
        Command::Run { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let outcome = runner::run(&cfg)?;
            print!("{}", report::table(&outcome.verdicts));
            Ok(outcome.pass())
        }
        Command::ValidateKernel { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let outcome = runner::run_validation(&cfg)?;
            print!("{}", report::table(&outcome.verdicts));
            Ok(outcome.pass())
        }
        Command::Report { dir } => {
            let verdicts = report::collect(&dir)?;
            print!("{}", report::table(&verdicts));
            Ok(verdicts.iter().all(|v| v.pass))
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_VERDICT_FAILED),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
