//! Config layering: built-in defaults, then an optional JSON config file,
//! then command-line flags. The fully materialized result is embedded in
//! every run manifest.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use rallycast_core::ingest::{Feature, ALL_FEATURES};
use rallycast_core::model::ModelConfig;
use rallycast_core::model::DecodeMode;
use rallycast_core::train::{GridSpec, TrainConfig};
use serde::{Deserialize, Serialize};

/// Every knob the pipeline accepts, with all defaults materialized.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedConfig {
    pub seed: u64,
    pub dim: usize,
    pub layers: usize,
    pub n_heads: usize,
    pub dropout: f64,
    pub alpha: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub folds: usize,
    pub mode: String,
    pub temperature: f64,
    pub rallies: usize,
    pub features: Vec<String>,
    pub grid_dims: Vec<usize>,
    pub grid_layers: Vec<usize>,
    pub grid_alphas: Vec<f64>,
}

impl Default for ResolvedConfig {
    fn default() -> Self {
        let model = ModelConfig::default();
        let train = TrainConfig::default();
        let grid = GridSpec::default();
        ResolvedConfig {
            seed: train.seed,
            dim: model.dim,
            layers: model.layers,
            n_heads: model.n_heads,
            dropout: model.dropout,
            alpha: train.alpha,
            learning_rate: train.learning_rate,
            batch_size: train.batch_size,
            epochs: train.epochs,
            folds: train.k_folds,
            mode: "sample".into(),
            temperature: 1.0,
            rallies: 100,
            features: ALL_FEATURES.iter().map(|f| f.name().to_string()).collect(),
            grid_dims: grid.dims,
            grid_layers: grid.layers,
            grid_alphas: grid.alphas,
        }
    }
}

/// Partial configuration read from `--config`; absent fields keep the
/// value from the layer below.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub dim: Option<usize>,
    pub layers: Option<usize>,
    pub n_heads: Option<usize>,
    pub dropout: Option<f64>,
    pub alpha: Option<f64>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub folds: Option<usize>,
    pub mode: Option<String>,
    pub temperature: Option<f64>,
    pub rallies: Option<usize>,
    pub features: Option<Vec<String>>,
    pub grid_dims: Option<Vec<usize>>,
    pub grid_layers: Option<Vec<usize>>,
    pub grid_alphas: Option<Vec<f64>>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        serde_json::from_str(&text)
            .with_context(|| format!("parsing config file {}", path.display()))
    }
}

/// Flag-level overrides; the top layer.
#[derive(Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub dim: Option<usize>,
    pub layers: Option<usize>,
    pub alpha: Option<f64>,
    pub epochs: Option<usize>,
    pub folds: Option<usize>,
    pub mode: Option<String>,
    pub rallies: Option<usize>,
    pub features: Option<Vec<String>>,
}

fn overlay<T>(slot: &mut T, value: Option<T>) {
    if let Some(value) = value {
        *slot = value;
    }
}

impl ResolvedConfig {
    /// Applies the three layers in order and validates fields that no
    /// downstream constructor checks.
    pub fn resolve(file: Option<FileConfig>, flags: Overrides) -> Result<ResolvedConfig> {
        let mut resolved = ResolvedConfig::default();
        if let Some(file) = file {
            overlay(&mut resolved.seed, file.seed);
            overlay(&mut resolved.dim, file.dim);
            overlay(&mut resolved.layers, file.layers);
            overlay(&mut resolved.n_heads, file.n_heads);
            overlay(&mut resolved.dropout, file.dropout);
            overlay(&mut resolved.alpha, file.alpha);
            overlay(&mut resolved.learning_rate, file.learning_rate);
            overlay(&mut resolved.batch_size, file.batch_size);
            overlay(&mut resolved.epochs, file.epochs);
            overlay(&mut resolved.folds, file.folds);
            overlay(&mut resolved.mode, file.mode);
            overlay(&mut resolved.temperature, file.temperature);
            overlay(&mut resolved.rallies, file.rallies);
            overlay(&mut resolved.features, file.features);
            overlay(&mut resolved.grid_dims, file.grid_dims);
            overlay(&mut resolved.grid_layers, file.grid_layers);
            overlay(&mut resolved.grid_alphas, file.grid_alphas);
        }
        overlay(&mut resolved.seed, flags.seed);
        overlay(&mut resolved.dim, flags.dim);
        overlay(&mut resolved.layers, flags.layers);
        overlay(&mut resolved.alpha, flags.alpha);
        overlay(&mut resolved.epochs, flags.epochs);
        overlay(&mut resolved.folds, flags.folds);
        overlay(&mut resolved.mode, flags.mode);
        overlay(&mut resolved.rallies, flags.rallies);
        overlay(&mut resolved.features, flags.features);

        if resolved.mode != "sample" && resolved.mode != "argmax" {
            bail!("mode must be `sample` or `argmax`, got {:?}", resolved.mode);
        }
        if resolved.rallies == 0 {
            bail!("rallies must be at least 1");
        }
        if !(resolved.temperature.is_finite() && resolved.temperature > 0.0) {
            bail!("temperature must be a positive number");
        }
        Ok(resolved)
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            dim: self.dim,
            layers: self.layers,
            n_heads: self.n_heads,
            dropout: self.dropout,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            alpha: self.alpha,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            epochs: self.epochs,
            k_folds: self.folds,
            seed: self.seed,
        }
    }

    pub fn grid_spec(&self) -> GridSpec {
        GridSpec {
            dims: self.grid_dims.clone(),
            layers: self.grid_layers.clone(),
            alphas: self.grid_alphas.clone(),
        }
    }

    pub fn decode_mode(&self) -> DecodeMode {
        match self.mode.as_str() {
            "argmax" => DecodeMode::Argmax,
            _ => DecodeMode::Sample {
                temperature: self.temperature,
            },
        }
    }

    pub fn feature_list(&self) -> Result<Vec<Feature>> {
        self.features
            .iter()
            .map(|name| Feature::parse(name).map_err(anyhow::Error::from))
            .collect()
    }
}
