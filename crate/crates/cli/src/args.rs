//! Command-line surface: one subcommand per pipeline stage, each carrying
//! the shared config/seed/out options plus its own overrides.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::Overrides;

#[derive(Debug, Parser)]
#[command(name = "rallycast", version, about = "Badminton rally stroke forecasting pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic stroke-log CSV.
    Synth(SynthArgs),
    /// Compute the pairwise association matrix of categorical features.
    Corr(CorrArgs),
    /// Train one model on the whole dataset.
    Train(FitArgs),
    /// Cross-validate one configuration over k folds.
    Cv(FitArgs),
    /// Grid-search (dim, layers, alpha) with cross-validation.
    Select(SelectArgs),
    /// Write candidate continuations for every rally.
    Predict(ScoreArgs),
    /// Score candidate continuations against the real continuations.
    Evaluate(ScoreArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON config file layered between built-in defaults and flags.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Root random seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory that receives all artifacts.
    #[arg(long, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Number of rallies to generate.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub rallies: Option<u64>,
}

#[derive(Debug, Args)]
pub struct CorrArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Stroke-log CSV to analyze.
    pub data: PathBuf,
    /// Comma-separated feature names (default: all seven).
    #[arg(long, value_delimiter = ',', value_name = "NAMES")]
    pub features: Option<Vec<String>>,
}

/// Options shared by `train` and `cv`.
#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Stroke-log CSV to fit on.
    pub data: PathBuf,
    /// Model width.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Encoder and decoder depth.
    #[arg(long)]
    pub layers: Option<usize>,
    /// Weight of the shot-type and landing terms in the composite loss.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Training epochs.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Number of cross-validation folds.
    #[arg(long)]
    pub folds: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Stroke-log CSV to fit on.
    pub data: PathBuf,
    /// Training epochs per grid point.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Number of cross-validation folds.
    #[arg(long)]
    pub folds: Option<usize>,
}

/// Options shared by `predict` and `evaluate`.
#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Stroke-log CSV holding the rallies to continue.
    pub data: PathBuf,
    /// Trained checkpoint JSON.
    #[arg(long, value_name = "PATH")]
    pub checkpoint: PathBuf,
    /// How candidates are decoded.
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Sample,
    Argmax,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Sample => "sample",
            Mode::Argmax => "argmax",
        }
    }
}

impl FitArgs {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.common.seed,
            dim: self.dim,
            layers: self.layers,
            alpha: self.alpha,
            epochs: self.epochs,
            folds: self.folds,
            ..Overrides::default()
        }
    }
}

impl SelectArgs {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.common.seed,
            epochs: self.epochs,
            folds: self.folds,
            ..Overrides::default()
        }
    }
}

impl ScoreArgs {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.common.seed,
            mode: self.mode.map(|m| m.as_str().to_string()),
            ..Overrides::default()
        }
    }
}
