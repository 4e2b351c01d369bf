//! `silofed`: generate data, train, explain and report.

mod commands;
mod config;
mod error;
mod manifest;
mod report;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{Mode, Run};
use crate::config::ExperimentConfig;
use crate::error::CliResult;

#[derive(Debug, Parser)]
#[command(name = "silofed", version, about = "Cross-silo federated learning simulator")]
struct Cli {
    /// Experiment config (JSON); built-in defaults when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run directory for all outputs.
    #[arg(long, global = true, default_value = "run")]
    out: PathBuf,
    /// Overrides the config's experiment seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the synthetic survey as CSV plus its schema.
    GenerateData,
    /// Train and evaluate.
    Train {
        #[arg(long, value_enum, default_value = "federated")]
        mode: Mode,
    },
    /// Attribute predictions of a trained model.
    Explain {
        /// Defaults to the run directory's model.bin.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Summarize a run directory.
    Report {
        #[arg(long)]
        svg: bool,
    },
    /// Print the default config as JSON.
    DefaultConfig,
}

fn load_config(cli: &Cli) -> CliResult<ExperimentConfig> {
    let cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    cfg.resolve(cli.seed)
}

fn execute(cli: Cli) -> CliResult<()> {
    match &cli.command {
        Command::Report { svg } => report::report(&cli.out, *svg),
        Command::DefaultConfig => {
            let cfg = ExperimentConfig::default();
            println!("{}", serde_json::to_string_pretty(&cfg).expect("serializable"));
            Ok(())
        }
        Command::GenerateData => {
            let mut run = Run::open(&cli.out, load_config(&cli)?)?;
            commands::generate_data(&mut run)?;
            run.finish()
        }
        Command::Train { mode } => {
            let mut run = Run::open(&cli.out, load_config(&cli)?)?;
            commands::train(&mut run, *mode)?;
            run.finish()
        }
        Command::Explain { model } => {
            let mut run = Run::open(&cli.out, load_config(&cli)?)?;
            commands::explain(&mut run, model.clone())?;
            run.finish()
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "debug" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
