//! Teacher-forced training loop: length-bucketed batches, Adam updates and
//! a per-epoch loss curve.

use std::io::Write;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::AdamState;
use crate::model::{Model, ModelConfig, PreparedRally, VocabSizes, PREFIX_LEN};
use crate::seeds;
use crate::train::batching::shuffled_batches;
use crate::train::loss::{composite_loss, LossBreakdown, StepTargets};
use crate::{Error, Result};

/// Optimization settings shared by single runs, cross validation and the
/// grid search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Weight of the shot-type and landing terms; the five auxiliary
    /// heads get `1 - alpha`.
    pub alpha: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub k_folds: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            alpha: 0.4,
            learning_rate: 1e-4,
            batch_size: 32,
            epochs: 50,
            k_folds: 5,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        if self.learning_rate <= 0.0 || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!(
                "learning rate must be positive and finite, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epoch count must be at least 1".into()));
        }
        if self.k_folds < 2 {
            return Err(Error::Config(format!(
                "cross validation needs at least 2 folds, got {}",
                self.k_folds
            )));
        }
        Ok(())
    }
}

/// Mean losses over one epoch, weighted by decoded steps per batch.
/// Epochs count from 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: LossBreakdown,
}

#[derive(Debug)]
pub struct TrainOutput {
    pub model: Model,
    pub curve: Vec<EpochRecord>,
}

/// Trains a fresh model on prepared rallies. Batches group rallies of
/// equal length, the batch order reshuffles every epoch under a seed
/// derived from `config.seed`, and a non-finite loss aborts with the
/// offending epoch and batch (both counted from 1).
pub fn train(
    rallies: &[PreparedRally],
    model_config: ModelConfig,
    vocab: VocabSizes,
    config: &TrainConfig,
) -> Result<TrainOutput> {
    config.validate()?;
    if rallies.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    for rally in rallies {
        if rally.len() < PREFIX_LEN + 1 {
            return Err(Error::Rally {
                rally: rally.id.clone(),
                message: format!("too short to train on ({} strokes)", rally.len()),
            });
        }
    }

    let mut model = Model::new(model_config, vocab, config.seed)?;
    let mut adam = AdamState::new(config.learning_rate);
    let mut dropout_rng = seeds::stream(config.seed, "dropout");
    let lengths: Vec<usize> = rallies.iter().map(|r| r.len()).collect();

    let mut curve = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let mut shuffle_rng = seeds::stream(config.seed, &format!("batches/{epoch}"));
        let batches = shuffled_batches(&lengths, config.batch_size, &mut shuffle_rng);

        let mut sums = LossSums::default();
        for (index, batch) in batches.iter().enumerate() {
            let batch_no = index + 1;
            let breakdown =
                train_batch(&mut model, rallies, batch, config.alpha, &mut dropout_rng)
                    .map_err(|e| at_batch(e, epoch, batch_no))?;
            if !breakdown.total.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch: batch_no,
                });
            }
            let steps: usize = batch.iter().map(|&i| rallies[i].len() - PREFIX_LEN).sum();
            sums.accumulate(&breakdown, steps);

            let mut adam_result = adam.step(&mut model.params);
            if let Err(Error::NanGradient(_)) = adam_result {
                adam_result = Err(Error::Diverged {
                    epoch,
                    batch: batch_no,
                });
            }
            adam_result?;
        }
        curve.push(EpochRecord {
            epoch,
            loss: sums.mean(config.alpha),
        });
    }

    Ok(TrainOutput { model, curve })
}

fn at_batch(e: Error, epoch: usize, batch: usize) -> Error {
    match e {
        Error::Config(msg) => Error::Config(format!("epoch {epoch}, batch {batch}: {msg}")),
        other => other,
    }
}

/// Runs one forward/backward pass over a batch, leaving fresh gradients
/// in the parameter set.
fn train_batch(
    model: &mut Model,
    rallies: &[PreparedRally],
    batch: &[usize],
    alpha: f64,
    dropout_rng: &mut ChaCha8Rng,
) -> Result<LossBreakdown> {
    let mut fwd = model.forward();
    let mut rng = Some(&mut *dropout_rng);
    let mut per_rally = Vec::with_capacity(batch.len());
    for &i in batch {
        let rally = &rallies[i];
        let memories = fwd.encode_sequences(rally.prefix(), &mut rng)?;
        let heads = fwd.decode(rally.decoder_inputs(), &memories, &mut rng)?;
        let targets: Vec<StepTargets> = rally
            .targets()
            .iter()
            .map(StepTargets::from_stroke)
            .collect();
        per_rally.push((heads, targets));
    }
    let (total, breakdown) = composite_loss(&mut fwd.graph, &per_rally, alpha)?;
    if !breakdown.total.is_finite() {
        return Ok(breakdown);
    }
    let (mut graph, vars) = fwd.into_parts();
    graph.backward(total);
    model.params.import_grads(&graph, &vars);
    Ok(breakdown)
}

#[derive(Default)]
struct LossSums {
    shot_type: f64,
    shot_location: f64,
    backhand: f64,
    aroundhead: f64,
    height: f64,
    player_location: f64,
    opponent_location: f64,
    steps: usize,
}

impl LossSums {
    fn accumulate(&mut self, b: &LossBreakdown, steps: usize) {
        let w = steps as f64;
        self.shot_type += b.shot_type * w;
        self.shot_location += b.shot_location * w;
        self.backhand += b.backhand * w;
        self.aroundhead += b.aroundhead * w;
        self.height += b.height * w;
        self.player_location += b.player_location * w;
        self.opponent_location += b.opponent_location * w;
        self.steps += steps;
    }

    fn mean(&self, alpha: f64) -> LossBreakdown {
        let n = self.steps.max(1) as f64;
        let mut out = LossBreakdown {
            total: 0.0,
            shot_type: self.shot_type / n,
            shot_location: self.shot_location / n,
            backhand: self.backhand / n,
            aroundhead: self.aroundhead / n,
            height: self.height / n,
            player_location: self.player_location / n,
            opponent_location: self.opponent_location / n,
        };
        out.total = out.recombined(alpha);
        out
    }
}

/// Writes the loss curve as CSV, one row per epoch.
pub fn write_curve_csv<W: Write>(curve: &[EpochRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "epoch",
        "total",
        "shot_type",
        "shot_location",
        "backhand",
        "aroundhead",
        "height",
        "player_location",
        "opponent_location",
    ])?;
    for r in curve {
        w.write_record([
            r.epoch.to_string(),
            r.loss.total.to_string(),
            r.loss.shot_type.to_string(),
            r.loss.shot_location.to_string(),
            r.loss.backhand.to_string(),
            r.loss.aroundhead.to_string(),
            r.loss.height.to_string(),
            r.loss.player_location.to_string(),
            r.loss.opponent_location.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
