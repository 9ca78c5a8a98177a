//! Autoregressive candidate generation from a 4-stroke prefix.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::input::{StrokeIds, PREFIX_LEN};
use super::net::Model;
use crate::{seeds, Error, Result};

/// How the next stroke is chosen at each step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecodeMode {
    /// Sample categoricals from their softmax at the given temperature and
    /// coordinates from the predicted bivariate Gaussian.
    Sample { temperature: f64 },
    /// Highest-probability shot and Gaussian mean; fully deterministic.
    Argmax,
}

impl Default for DecodeMode {
    fn default() -> Self {
        DecodeMode::Sample { temperature: 1.0 }
    }
}

/// One generated stroke. `shot_probs` is the model's full shot-type
/// distribution at this step (temperature 1), kept for CE scoring;
/// coordinates are in normalized units.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedStroke {
    pub shot_type: usize,
    pub shot_probs: Vec<f64>,
    pub x: f64,
    pub y: f64,
    pub aroundhead: usize,
    pub backhand: usize,
    pub height: usize,
    pub player_loc: usize,
    pub opponent_loc: usize,
}

/// One sampled continuation of a rally.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub strokes: Vec<GeneratedStroke>,
}

/// All candidates generated for one rally.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub rally_id: String,
    pub candidates: Vec<Candidate>,
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn sample_index(probs: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random();
    let mut cumulative = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        cumulative += p;
        if u < cumulative {
            return i;
        }
    }
    probs.len() - 1
}

fn pick(logits: &[f64], mode: &DecodeMode, rng: &mut ChaCha8Rng) -> usize {
    match mode {
        DecodeMode::Argmax => argmax(logits),
        DecodeMode::Sample { temperature } => {
            let scaled: Vec<f64> = logits.iter().map(|&l| l / temperature).collect();
            sample_index(&softmax(&scaled), rng)
        }
    }
}

impl Model {
    /// Generates `n_candidates` continuations of `target_len` strokes from
    /// a 4-stroke prefix. Candidates draw from independent streams derived
    /// from the seed and rally id, so the output is reproducible per seed
    /// and candidates are mutually independent.
    pub fn generate(
        &self,
        rally_id: &str,
        prefix: &[StrokeIds],
        target_len: usize,
        n_candidates: usize,
        seed: u64,
        mode: &DecodeMode,
    ) -> Result<CandidateSet> {
        if prefix.len() != PREFIX_LEN {
            return Err(Error::Config(format!(
                "generation needs a {PREFIX_LEN}-stroke prefix, got {}",
                prefix.len()
            )));
        }
        if target_len == 0 {
            return Err(Error::Config("target length must be at least 1".into()));
        }
        if n_candidates == 0 {
            return Err(Error::Config("need at least one candidate".into()));
        }
        if let DecodeMode::Sample { temperature } = mode {
            if *temperature <= 0.0 || !temperature.is_finite() {
                return Err(Error::Config(format!(
                    "temperature must be positive and finite, got {temperature}"
                )));
            }
        }

        let mut fwd = self.forward();
        let memories = fwd.encode_sequences(prefix, &mut None)?;

        let mut candidates = Vec::with_capacity(n_candidates);
        for candidate_index in 0..n_candidates {
            let mut rng = seeds::stream(seed, &format!("gen/{rally_id}/candidate/{candidate_index}"));
            let mut inputs: Vec<StrokeIds> = vec![prefix[PREFIX_LEN - 1]];
            let mut strokes = Vec::with_capacity(target_len);
            for _ in 0..target_len {
                let heads = fwd.decode(&inputs, &memories, &mut None)?;
                let last = inputs.len() - 1;
                let row = |v| {
                    let t = fwd.graph.value(v);
                    let cols = t.cols();
                    t.data()[last * cols..(last + 1) * cols].to_vec()
                };

                let shot_logits = row(heads.shot_logits);
                let shot_probs = softmax(&shot_logits);
                let shot_type = pick(&shot_logits, mode, &mut rng);
                let aroundhead = pick(&row(heads.aroundhead_logits), mode, &mut rng);
                let backhand = pick(&row(heads.backhand_logits), mode, &mut rng);
                let height = pick(&row(heads.height_logits), mode, &mut rng);
                let player_loc = pick(&row(heads.player_loc_logits), mode, &mut rng);
                let opponent_loc = pick(&row(heads.opponent_loc_logits), mode, &mut rng);

                let mu_x = row(heads.area.mu_x)[0];
                let mu_y = row(heads.area.mu_y)[0];
                let (x, y) = match mode {
                    DecodeMode::Argmax => (mu_x, mu_y),
                    DecodeMode::Sample { .. } => {
                        let sigma_x = row(heads.area.sigma_x)[0];
                        let sigma_y = row(heads.area.sigma_y)[0];
                        let rho = row(heads.area.rho)[0];
                        let z1 = seeds::standard_normal(&mut rng);
                        let z2 = seeds::standard_normal(&mut rng);
                        (
                            mu_x + sigma_x * z1,
                            mu_y + sigma_y * (rho * z1 + (1.0 - rho * rho).sqrt() * z2),
                        )
                    }
                };

                let target_position = inputs[last].position + 1;
                let actor = target_position % 2;
                strokes.push(GeneratedStroke {
                    shot_type,
                    shot_probs,
                    x,
                    y,
                    aroundhead,
                    backhand,
                    height,
                    player_loc,
                    opponent_loc,
                });
                inputs.push(StrokeIds {
                    shot_type,
                    aroundhead,
                    backhand,
                    height,
                    player_loc,
                    opponent_loc,
                    player: prefix[actor].player,
                    x: x.clamp(0.0, 1.0),
                    y: y.clamp(0.0, 1.0),
                    position: target_position,
                    actor,
                });
            }
            candidates.push(Candidate { strokes });
        }
        Ok(CandidateSet {
            rally_id: rally_id.to_string(),
            candidates,
        })
    }
}
