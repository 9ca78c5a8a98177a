//! K-fold cross validation. Every fold refits vocabularies and the
//! coordinate scaler on its own training split, so nothing from a holdout
//! rally leaks into preprocessing.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::ingest::{build_vocabularies, split_folds, CoordScaler, Rally, Vocabularies};
use crate::metric::{evaluate_dataset, MetricReport};
use crate::model::{prepare_dataset, Checkpoint, DecodeMode, ModelConfig, VocabSizes};
use crate::seeds;
use crate::train::pool::thread_pool;
use crate::train::trainer::{train, EpochRecord, TrainConfig};
use crate::{Error, Result};

/// Everything produced by one fold: the trained model as a checkpoint,
/// its loss curve and the holdout evaluation.
pub struct FoldOutcome {
    pub fold: usize,
    pub checkpoint: Checkpoint,
    pub curve: Vec<EpochRecord>,
    pub report: MetricReport,
}

/// All fold outcomes plus score statistics across folds. `sd_score` is
/// the sample standard deviation of the fold scores.
pub struct CvOutput {
    pub folds: Vec<FoldOutcome>,
    pub mean_score: f64,
    pub sd_score: f64,
    pub mean_shot: f64,
    pub mean_area: f64,
}

impl CvOutput {
    pub fn fold_scores(&self) -> Vec<f64> {
        self.folds
            .iter()
            .map(|f| f.report.aggregate.total_loss)
            .collect()
    }
}

/// Mean and sample standard deviation of a nonempty slice.
pub fn mean_and_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Runs `config.k_folds`-fold cross validation over raw rallies. Folds
/// train in parallel; each derives its own seed, so results do not depend
/// on scheduling, and the fold assignment ignores input order.
pub fn cross_validate(
    rallies: &[Rally],
    model_config: ModelConfig,
    config: &TrainConfig,
) -> Result<CvOutput> {
    config.validate()?;
    model_config.validate()?;
    let splits = split_folds(rallies, config.k_folds, config.seed)?;
    let by_id: BTreeMap<&str, &Rally> = rallies.iter().map(|r| (r.id.as_str(), r)).collect();

    let folds: Vec<FoldOutcome> = thread_pool().install(|| {
        splits
            .par_iter()
            .map(|split| run_fold(split.fold, &split.train_ids, &split.holdout_ids, &by_id, model_config, config))
            .collect::<Result<Vec<_>>>()
    })?;

    let scores = folds
        .iter()
        .map(|f| f.report.aggregate.total_loss)
        .collect::<Vec<_>>();
    let (mean_score, sd_score) = mean_and_sd(&scores);
    let shots: Vec<f64> = folds
        .iter()
        .map(|f| f.report.aggregate.shot_loss)
        .collect();
    let areas: Vec<f64> = folds
        .iter()
        .map(|f| f.report.aggregate.area_loss)
        .collect();

    Ok(CvOutput {
        mean_score,
        sd_score,
        mean_shot: mean_and_sd(&shots).0,
        mean_area: mean_and_sd(&areas).0,
        folds,
    })
}

fn gather(ids: &[String], by_id: &BTreeMap<&str, &Rally>) -> Vec<Rally> {
    ids.iter()
        .filter_map(|id| by_id.get(id.as_str()).map(|&r| r.clone()))
        .collect()
}

fn run_fold(
    fold: usize,
    train_ids: &[String],
    holdout_ids: &[String],
    by_id: &BTreeMap<&str, &Rally>,
    model_config: ModelConfig,
    config: &TrainConfig,
) -> Result<FoldOutcome> {
    let train_rallies = gather(train_ids, by_id);
    let holdout_rallies = gather(holdout_ids, by_id);

    let vocabs: Vocabularies = build_vocabularies(&train_rallies);
    let scaler = CoordScaler::fit(&train_rallies).map_err(|e| fold_error(fold, &e))?;

    let (prepared_train, _, _) =
        prepare_dataset(&train_rallies, &vocabs, &scaler).map_err(|e| fold_error(fold, &e))?;
    if prepared_train.is_empty() {
        return Err(Error::Config(format!(
            "fold {fold}: no training rally is long enough to learn from"
        )));
    }
    let (prepared_holdout, _, _) =
        prepare_dataset(&holdout_rallies, &vocabs, &scaler).map_err(|e| fold_error(fold, &e))?;
    if prepared_holdout.is_empty() {
        return Err(Error::Config(format!(
            "fold {fold}: no holdout rally is long enough to score"
        )));
    }

    let fold_config = TrainConfig {
        seed: seeds::derive(config.seed, &format!("fold/{fold}")),
        ..config.clone()
    };
    let out = train(
        &prepared_train,
        model_config,
        VocabSizes::from_vocabularies(&vocabs),
        &fold_config,
    )?;
    let report = evaluate_dataset(
        &out.model,
        &prepared_holdout,
        seeds::derive(config.seed, &format!("eval/{fold}")),
        &DecodeMode::default(),
    )?;
    Ok(FoldOutcome {
        fold,
        checkpoint: Checkpoint::from_model(&out.model, &vocabs, &scaler),
        curve: out.curve,
        report,
    })
}

fn fold_error(fold: usize, e: &Error) -> Error {
    Error::Config(format!("fold {fold}: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{generate_synthetic, SynthConfig};
    use rand::seq::SliceRandom;

    fn quick_config(k: usize) -> TrainConfig {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 8,
            epochs: 1,
            k_folds: k,
            seed: 31,
            ..TrainConfig::default()
        }
    }

    fn tiny_model() -> ModelConfig {
        ModelConfig {
            dim: 8,
            layers: 1,
            n_heads: 2,
            dropout: 0.1,
        }
    }

    #[test]
    fn five_folds_produce_five_scored_checkpoints() {
        let rallies = generate_synthetic(15, 61, &SynthConfig::default()).unwrap();
        let out = cross_validate(&rallies, tiny_model(), &quick_config(5)).unwrap();
        assert_eq!(out.folds.len(), 5);
        for (i, fold) in out.folds.iter().enumerate() {
            assert_eq!(fold.fold, i);
            assert_eq!(fold.curve.len(), 1);
            assert!(fold.report.aggregate.total_loss.is_finite());
            fold.checkpoint.clone().into_model().unwrap();
        }
        let scores = out.fold_scores();
        let naive_mean = scores.iter().sum::<f64>() / scores.len() as f64;
        assert!((out.mean_score - naive_mean).abs() < 1e-12);
        assert!(out.sd_score >= 0.0);
    }

    #[test]
    fn input_order_does_not_change_the_outcome() {
        let rallies = generate_synthetic(10, 62, &SynthConfig::default()).unwrap();
        let a = cross_validate(&rallies, tiny_model(), &quick_config(2)).unwrap();

        let mut shuffled = rallies;
        shuffled.shuffle(&mut crate::seeds::stream(99, "permute"));
        let b = cross_validate(&shuffled, tiny_model(), &quick_config(2)).unwrap();

        assert_eq!(a.mean_score, b.mean_score);
        assert_eq!(a.sd_score, b.sd_score);
        assert_eq!(a.fold_scores(), b.fold_scores());
    }

    #[test]
    fn mean_and_sd_match_hand_computation() {
        let (mean, sd) = mean_and_sd(&[2.0, 4.0, 6.0]);
        assert!((mean - 4.0).abs() < 1e-12);
        assert!((sd - 2.0).abs() < 1e-12);
        let (single_mean, single_sd) = mean_and_sd(&[3.5]);
        assert_eq!(single_mean, 3.5);
        assert_eq!(single_sd, 0.0);
    }

    #[test]
    fn too_few_rallies_for_k_is_rejected() {
        let rallies = generate_synthetic(3, 63, &SynthConfig::default()).unwrap();
        assert!(cross_validate(&rallies, tiny_model(), &quick_config(5)).is_err());
    }
}
