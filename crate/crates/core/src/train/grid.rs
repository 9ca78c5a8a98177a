//! Grid search over embedding width, encoder depth and the loss weight,
//! with cross-validated scoring and three selection criteria.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::ingest::Rally;
use crate::model::ModelConfig;
use crate::train::cv::{cross_validate, CvOutput};
use crate::train::trainer::TrainConfig;
use crate::{Error, Result};

/// Axes of the search. The defaults span 3 widths, 3 depths and 4 loss
/// weights, 36 configurations in total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub dims: Vec<usize>,
    pub layers: Vec<usize>,
    pub alphas: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            dims: vec![32, 64, 128],
            layers: vec![1, 2, 3],
            alphas: vec![0.3, 0.35, 0.4, 0.45],
        }
    }
}

impl GridSpec {
    /// All combinations, dims outermost and alphas innermost.
    pub fn points(&self) -> Result<Vec<GridPoint>> {
        if self.dims.is_empty() || self.layers.is_empty() || self.alphas.is_empty() {
            return Err(Error::Config("every grid axis needs at least one value".into()));
        }
        let mut points = Vec::with_capacity(self.dims.len() * self.layers.len() * self.alphas.len());
        for &dim in &self.dims {
            for &layers in &self.layers {
                for &alpha in &self.alphas {
                    points.push(GridPoint { dim, layers, alpha });
                }
            }
        }
        Ok(points)
    }
}

/// One searched configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub dim: usize,
    pub layers: usize,
    pub alpha: f64,
}

impl GridPoint {
    /// Stable id used in file names and the selection report.
    pub fn label(&self) -> String {
        format!("d{}_L{}_a{}", self.dim, self.layers, self.alpha)
    }
}

/// Cross-validated outcome of one grid point. A failed run keeps its
/// place in the list with the failure in `error` and NaN statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub point: GridPoint,
    pub fold_scores: Vec<f64>,
    pub mean_score: f64,
    pub sd_score: f64,
    pub mean_shot: f64,
    pub mean_area: f64,
    pub wall_time_s: f64,
    pub error: Option<String>,
}

/// A selected configuration and, when checkpoints were written, the
/// per-fold checkpoint files backing it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Winner {
    pub label: String,
    pub point: GridPoint,
    pub checkpoints: Vec<String>,
}

/// The three winning configurations: lowest mean score, lowest mean shot
/// cross entropy and lowest mean landing error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub best_total: Winner,
    pub best_shot: Winner,
    pub best_area: Winner,
}

/// Cross-validates every grid point and selects winners by total score,
/// shot cross entropy and landing error. Failures at single points are
/// recorded, not fatal; only a fully failed grid is an error. With a
/// checkpoint directory, each successful point saves one checkpoint per
/// fold under `<label>_fold<k>.json`.
pub fn loss_selection(
    rallies: &[Rally],
    spec: &GridSpec,
    base: &ModelConfig,
    config: &TrainConfig,
    checkpoint_dir: Option<&Path>,
) -> Result<(Vec<GridResult>, SelectionReport)> {
    let points = spec.points()?;
    if let Some(dir) = checkpoint_dir {
        std::fs::create_dir_all(dir)?;
    }

    let mut results = Vec::with_capacity(points.len());
    let mut checkpoint_paths: Vec<Vec<String>> = Vec::with_capacity(points.len());
    for point in points {
        let model_config = ModelConfig {
            dim: point.dim,
            layers: point.layers,
            n_heads: base.n_heads,
            dropout: base.dropout,
        };
        let train_config = TrainConfig {
            alpha: point.alpha,
            ..config.clone()
        };
        let started = Instant::now();
        let outcome = cross_validate(rallies, model_config, &train_config);
        let wall_time_s = started.elapsed().as_secs_f64();
        match outcome {
            Ok(cv) => {
                let paths = save_checkpoints(&point, &cv, checkpoint_dir)?;
                checkpoint_paths.push(paths);
                results.push(GridResult {
                    point,
                    fold_scores: cv.fold_scores(),
                    mean_score: cv.mean_score,
                    sd_score: cv.sd_score,
                    mean_shot: cv.mean_shot,
                    mean_area: cv.mean_area,
                    wall_time_s,
                    error: None,
                });
            }
            Err(e) => {
                checkpoint_paths.push(Vec::new());
                results.push(GridResult {
                    point,
                    fold_scores: Vec::new(),
                    mean_score: f64::NAN,
                    sd_score: f64::NAN,
                    mean_shot: f64::NAN,
                    mean_area: f64::NAN,
                    wall_time_s,
                    error: Some(e.to_string()),
                });
            }
        }
    }

    let report = select_winners(&results, &checkpoint_paths)?;
    Ok((results, report))
}

fn save_checkpoints(
    point: &GridPoint,
    cv: &CvOutput,
    dir: Option<&Path>,
) -> Result<Vec<String>> {
    let Some(dir) = dir else {
        return Ok(Vec::new());
    };
    let mut paths = Vec::with_capacity(cv.folds.len());
    for fold in &cv.folds {
        let path = dir.join(format!("{}_fold{}.json", point.label(), fold.fold));
        fold.checkpoint.save(&path)?;
        paths.push(path.to_string_lossy().into_owned());
    }
    Ok(paths)
}

/// Picks the three winners among the successful results. Ties keep the
/// earliest point in grid order.
pub fn select_winners(
    results: &[GridResult],
    checkpoint_paths: &[Vec<String>],
) -> Result<SelectionReport> {
    let best = |key: fn(&GridResult) -> f64| -> Option<usize> {
        let mut winner: Option<usize> = None;
        for (i, r) in results.iter().enumerate() {
            if r.error.is_some() {
                continue;
            }
            if winner.is_none_or(|w| key(r) < key(&results[w])) {
                winner = Some(i);
            }
        }
        winner
    };
    let make = |index: Option<usize>| -> Result<Winner> {
        let i = index.ok_or_else(|| {
            Error::Config("every grid point failed; nothing to select".into())
        })?;
        Ok(Winner {
            label: results[i].point.label(),
            point: results[i].point,
            checkpoints: checkpoint_paths.get(i).cloned().unwrap_or_default(),
        })
    };
    Ok(SelectionReport {
        best_total: make(best(|r| r.mean_score))?,
        best_shot: make(best(|r| r.mean_shot))?,
        best_area: make(best(|r| r.mean_area))?,
    })
}

/// Writes one CSV row per grid point: the configuration, per-fold scores,
/// score statistics and wall time. Failed points leave their numeric
/// cells empty and carry the error text.
pub fn write_grid_csv<W: Write>(results: &[GridResult], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let k = results.iter().map(|r| r.fold_scores.len()).max().unwrap_or(0);
    let mut header = vec!["d".to_string(), "L".to_string(), "alpha".to_string()];
    for i in 0..k {
        header.push(format!("fold_{i}"));
    }
    header.extend([
        "mean_score".to_string(),
        "sd_score".to_string(),
        "mean_shot_ce".to_string(),
        "mean_area_mae".to_string(),
        "wall_time_s".to_string(),
        "error".to_string(),
    ]);
    w.write_record(&header)?;

    let cell = |v: f64| if v.is_finite() { v.to_string() } else { String::new() };
    for r in results {
        let mut row = vec![
            r.point.dim.to_string(),
            r.point.layers.to_string(),
            r.point.alpha.to_string(),
        ];
        for i in 0..k {
            row.push(r.fold_scores.get(i).map(|&s| s.to_string()).unwrap_or_default());
        }
        row.extend([
            cell(r.mean_score),
            cell(r.sd_score),
            cell(r.mean_shot),
            cell(r.mean_area),
            r.wall_time_s.to_string(),
            r.error.clone().unwrap_or_default(),
        ]);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
