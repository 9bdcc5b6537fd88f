//! The `moodsig` command line.

pub mod commands;
pub mod config;
pub mod ingest;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::Result;
use config::{Overrides, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "moodsig", version, about = "Signature features for weekly mood questionnaires")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic cohort CSV.
    Synth(RunArgs),
    /// Diagnostic-group classification, MRSF vs naive.
    Classify(RunArgs),
    /// Next-week state prediction and the 5-week rollout.
    PredictState(RunArgs),
    /// Next-week score prediction with severity buckets.
    PredictScore(RunArgs),
    /// Simplex density plots from a spectrum CSV (loo_spectrum.csv, rollout_spectrum.csv).
    Spectrum(RunArgs),
    /// Print the signature of a stream given as a headed CSV of numeric columns.
    Sig {
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long, default_value_t = 2)]
        level: usize,
    },
    /// Summarize a saved forest.
    ModelInfo { path: PathBuf },
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// TOML run configuration.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, short)]
    pub input: Option<PathBuf>,
    #[arg(long, short)]
    pub out_dir: Option<PathBuf>,
    /// Trees per forest.
    #[arg(long)]
    pub trees: Option<usize>,
    /// Bootstrap resamples for the evaluation metrics.
    #[arg(long)]
    pub bootstrap: Option<usize>,
}

impl RunArgs {
    pub fn load(&self) -> Result<RunConfig> {
        let overrides = Overrides {
            seed: self.seed,
            input: self.input.clone(),
            out_dir: self.out_dir.clone(),
            trees: self.trees,
            bootstrap: self.bootstrap,
        };
        RunConfig::load(self.config.as_deref(), &overrides)
    }
}

/// Runs one command and returns what it prints on stdout.
pub fn run(cli: &Cli) -> Result<String> {
    let dir = |run: commands::Run| format!("{}\n", run.dir.display());
    match &cli.command {
        Command::Synth(a) => commands::synth(&a.load()?).map(dir),
        Command::Classify(a) => commands::classify(&a.load()?).map(dir),
        Command::PredictState(a) => commands::predict_state(&a.load()?).map(dir),
        Command::PredictScore(a) => commands::predict_score(&a.load()?).map(dir),
        Command::Spectrum(a) => commands::spectrum(&a.load()?).map(dir),
        Command::Sig { input, level } => {
            let values = commands::sig(input, *level)?;
            let line: Vec<String> = values.iter().map(f64::to_string).collect();
            Ok(format!("{}\n", line.join(",")))
        }
        Command::ModelInfo { path } => commands::model_info(path),
    }
}
