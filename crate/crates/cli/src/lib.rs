//! Command-line driver for the ghost imaging pipeline.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod error;
pub mod synth;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use commands::CommandCtx;
use config::ExperimentConfig;
use error::CliError;

#[derive(Parser, Debug)]
#[command(
    name = "ghostimg",
    about = "Single-pixel ghost imaging: simulate bucket measurements and reconstruct \
             objects by correlation, compressed sensing, or transformer translation",
    version
)]
pub struct Cli {
    /// Experiment configuration file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override the [run] seed
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Override the [run] out_dir
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for per-image stages
    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,
    /// Skip artifact provenance checks
    #[arg(long, global = true, default_value_t = false)]
    pub force: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Generate a synthetic IDX dataset at the configured dataset paths
    Dataset,
    /// Synthesize (or import) the illumination pattern stack
    Speckles,
    /// Preprocess objects and simulate bucket detector readings
    Simulate,
    /// Train the translation network on the train split
    Train,
    /// Translate test bucket sequences into images with the trained network
    Translate,
    /// Correlation (ghost imaging) baseline reconstruction
    ReconstructCgi,
    /// Compressed-sensing baseline reconstruction
    ReconstructCs,
    /// Compute MSE / SNR / SSIM / accuracy reports for every reconstruction
    Evaluate,
    /// Write the comparison montage and bar-chart data
    Render,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let config_path = cli
        .config
        .ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
    let mut cfg = ExperimentConfig::load(&config_path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.out_dir = out;
    }
    let ctx = CommandCtx { cfg, workers: cli.workers, force: cli.force };
    match cli.command {
        Command::Dataset => commands::cmd_dataset(&ctx),
        Command::Speckles => commands::cmd_speckles(&ctx),
        Command::Simulate => commands::cmd_simulate(&ctx),
        Command::Train => commands::cmd_train(&ctx),
        Command::Translate => commands::cmd_translate(&ctx),
        Command::ReconstructCgi => commands::cmd_reconstruct_cgi(&ctx),
        Command::ReconstructCs => commands::cmd_reconstruct_cs(&ctx),
        Command::Evaluate => commands::cmd_evaluate(&ctx),
        Command::Render => commands::cmd_render(&ctx),
    }
}

/// Parses argv-style arguments and runs; returns the process exit code.
pub fn run_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap reports --help/--version through the error path
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e);
            e.exit_code()
        }
    }
}
