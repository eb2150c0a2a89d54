//! `reidbench` command-line tool.
//!
//! Machine-readable results go to stdout as JSON; logs go to stderr.
//! Exit status is 0 on success, 1 when a command fails after its inputs
//! were accepted, and 2 for invalid arguments, configuration or data.

mod commands;
mod error;
mod features;
mod report;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "reidbench",
    version,
    about = "Person re-identification training and evaluation toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train on the configured sources and evaluate on the targets.
    Train(commands::train::TrainArgs),
    /// Rank a gallery against queries and print CMC and mAP.
    Evaluate(commands::evaluate::EvaluateArgs),
    /// Generate a synthetic dataset manifest with feature files.
    Synth(commands::synth::SynthArgs),
    /// Print record, identity and camera counts of a manifest.
    Stats(commands::stats::StatsArgs),
    /// Render ranked gallery results per query.
    Visrank(commands::visrank::VisrankArgs),
    /// Overlay an activation map on an image.
    Visactmap(commands::visactmap::VisactmapArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => commands::train::run(a),
        Command::Evaluate(a) => commands::evaluate::run(a),
        Command::Synth(a) => commands::synth::run(a),
        Command::Stats(a) => commands::stats::run(a),
        Command::Visrank(a) => commands::visrank::run(a),
        Command::Visactmap(a) => commands::visactmap::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
