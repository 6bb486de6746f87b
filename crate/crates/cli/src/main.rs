mod cache;
mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use config::{ExperimentConfig, Overrides};

/// Sampling, steep point detection and Monte Carlo checks for regularized
/// Gaussian free fields.
#[derive(Parser)]
#[command(name = "steepfield", version)]
struct Cli {
    /// Experiment config (versioned JSON); flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    replicas: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overwrite existing output files.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample field replicas on the lattice schedule.
    Simulate,
    /// Flag cells of replica files and count them per level.
    Detect {
        #[arg(value_name = "REPLICA")]
        files: Vec<PathBuf>,
    },
    /// Fit a box-counting slope to count CSVs.
    Dimension {
        #[arg(value_name = "COUNTS_CSV")]
        counts: Vec<PathBuf>,
    },
    /// Run a named Monte Carlo suite.
    Verify { suite: String },
    /// Frostman mass and energy, from replica files or exact concentric paths.
    Energy {
        #[arg(value_name = "REPLICA")]
        files: Vec<PathBuf>,
        #[arg(long)]
        level: Option<usize>,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
    },
    /// List the builtin test functions.
    Funcs,
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(j).build_global().context("starting worker pool")?;
    }
    if let Command::Funcs = cli.command {
        commands::funcs();
        return Ok(ExitCode::SUCCESS);
    }
    let overrides = Overrides { seed: cli.seed, replicas: cli.replicas, out: cli.out };
    let cfg = ExperimentConfig::load(cli.config.as_deref(), &overrides)?;
    match &cli.command {
        Command::Simulate => commands::simulate(&cfg, cli.force)?,
        Command::Detect { files } => commands::detect(&cfg, files, cli.force)?,
        Command::Dimension { counts } => commands::dimension(&cfg, counts, cli.force)?,
        Command::Verify { suite } => {
            if !commands::verify(&cfg, suite, cli.force)? {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Energy { files, level, alpha } => commands::energy(&cfg, files, *level, *alpha, cli.force)?,
        Command::Funcs => unreachable!(),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
