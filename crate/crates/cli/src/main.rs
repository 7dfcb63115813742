//! `phee`: command-line runner for pharmacovigilance event extraction
//! experiments.

mod commands;
mod config;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "phee", version, about = "Pharmacovigilance event extraction with chat LLMs")]
struct Cli {
    /// TOML run configuration. PHEE_ENDPOINT and PHEE_API_KEY override the
    /// endpoint and credential.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Seed for splits, folds, random selection and constraint sampling.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Log verbosity: -v info, -vv debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ingest a corpus, apply the revision rule, split and plan folds.
    PrepareData(commands::prepare::Args),
    /// Write the demonstrations chosen for each query instance.
    RetrieveDemos(commands::retrieve::Args),
    /// Extract events with the chat model.
    Extract(commands::extract::Args),
    /// Generate synthetic training instances from templates.
    Synthesize(commands::synthesize::Args),
    /// Apply the confidence filters and assemble training-data settings.
    Filter(commands::filter::Args),
    /// Score predictions against gold annotations.
    Evaluate(commands::evaluate::Args),
    /// Aggregate evaluation runs and compare their variances.
    Report(commands::report::Args),
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    match cli.command {
        Command::PrepareData(a) => commands::prepare::run(a, cfg),
        Command::RetrieveDemos(a) => commands::retrieve::run(a, cfg),
        Command::Extract(a) => commands::extract::run(a, cfg),
        Command::Synthesize(a) => commands::synthesize::run(a, cfg),
        Command::Filter(a) => commands::filter::run(a, cfg),
        Command::Evaluate(a) => commands::evaluate::run(a, cfg),
        Command::Report(a) => commands::report::run(a, cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
