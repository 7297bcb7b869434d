//! Command-line harness for demandstack: synthetic data, preprocessing,
//! repeated stacking experiments and prediction with saved models.

pub mod commands;
pub mod config;
pub mod experiment;
pub mod output;
pub mod pipeline;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

use crate::config::ExperimentConfig;

#[derive(Debug, Parser)]
#[command(
    name = "demandstack",
    version,
    about = "Stacked-generalization demand forecasting experiments"
)]
pub struct Cli {
    /// Experiment config (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the master seed from the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (overrides `[output] dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Print nothing on success.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic weekly, sale-level and view-event data.
    Synth,
    /// Ingest and preprocess the configured data.
    Preprocess,
    /// Run the repeated evaluation and write the report tables.
    Run,
    /// Predict with a saved model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Defaults to `predictions.csv` in the output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

/// Loads the config and applies the command-line overrides.
pub fn resolve_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => {
            let cfg = ExperimentConfig::default();
            cfg.validate()?;
            cfg
        }
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = out.clone();
    }
    Ok(cfg)
}

pub fn run(cli: &Cli) -> Result<()> {
    let text = match &cli.command {
        Command::Predict { model, input, output } => {
            let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
            let output = output
                .clone()
                .unwrap_or_else(|| commands::default_predictions_path(&out));
            commands::cmd_predict(model, input, &output)?
        }
        command => {
            let cfg = resolve_config(cli)?;
            let out = cfg.output.dir.clone();
            match command {
                Command::Synth => commands::cmd_synth(&cfg, &out)?,
                Command::Preprocess => commands::cmd_preprocess(&cfg, &out)?,
                Command::Run => commands::cmd_run(&cfg, &out)?,
                Command::Predict { .. } => unreachable!("handled above"),
            }
        }
    };
    if !cli.quiet {
        print!("{text}");
    }
    Ok(())
}
