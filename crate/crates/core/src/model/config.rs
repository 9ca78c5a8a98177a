//! Model hyperparameters and the parameter-count formula.

use serde::{Deserialize, Serialize};

use crate::ingest::{Feature, Vocabularies};
use crate::{Error, Result};

/// Architecture hyperparameters. Vocabulary sizes are carried separately
/// (see [`VocabSizes`]) because they are derived from fitted data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub dim: usize,
    pub layers: usize,
    pub n_heads: usize,
    pub dropout: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            dim: 32,
            layers: 1,
            n_heads: 2,
            dropout: 0.1,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.layers == 0 || self.n_heads == 0 {
            return Err(Error::Config(format!(
                "dim, layers and n_heads must be positive: d={}, L={}, heads={}",
                self.dim, self.layers, self.n_heads
            )));
        }
        if !self.dim.is_multiple_of(self.n_heads) {
            return Err(Error::Config(format!(
                "dim {} is not divisible by n_heads {}",
                self.dim, self.n_heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout must be in [0, 1), got {}",
                self.dropout
            )));
        }
        Ok(())
    }

    /// Width of the feed-forward hidden layer inside every block.
    pub fn ff_hidden(&self) -> usize {
        2 * self.dim
    }
}

/// Vocabulary sizes per categorical feature, in the order the embedding
/// tables are created.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabSizes {
    pub shot_type: usize,
    pub aroundhead: usize,
    pub backhand: usize,
    pub landing_height: usize,
    pub player_location: usize,
    pub opponent_location: usize,
    pub player: usize,
}

impl VocabSizes {
    pub fn from_vocabularies(vocabs: &Vocabularies) -> VocabSizes {
        VocabSizes {
            shot_type: vocabs.get(Feature::ShotType).size(),
            aroundhead: vocabs.get(Feature::Aroundhead).size(),
            backhand: vocabs.get(Feature::Backhand).size(),
            landing_height: vocabs.get(Feature::LandingHeight).size(),
            player_location: vocabs.get(Feature::PlayerLocationArea).size(),
            opponent_location: vocabs.get(Feature::OpponentLocationArea).size(),
            player: vocabs.get(Feature::Player).size(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, size) in [
            ("shot_type", self.shot_type),
            ("aroundhead", self.aroundhead),
            ("backhand", self.backhand),
            ("landing_height", self.landing_height),
            ("player_location", self.player_location),
            ("opponent_location", self.opponent_location),
            ("player", self.player),
        ] {
            if size < 3 {
                return Err(Error::Config(format!(
                    "vocabulary {name} has size {size}; need padding, unknown and at \
                     least one real value"
                )));
            }
        }
        Ok(())
    }

    /// Sum over the six context features embedded by both input types
    /// (everything except the shot type).
    fn context_total(&self) -> usize {
        self.aroundhead
            + self.backhand
            + self.landing_height
            + self.player_location
            + self.opponent_location
            + self.player
    }
}

/// Number of scalar parameters implied by a configuration.
///
/// With `d = dim`, `F = 2d` (feed-forward hidden width), `L = layers`,
/// shot vocabulary `S` and context vocabulary total
/// `C = aroundhead + backhand + height + player_loc + opponent_loc + player`:
///
/// - input embeddings: `(S + C)·d` for type 1, `C·d + (2d + d)` for type 2
///   (separate context tables plus the coordinate affine map);
/// - one attention unit: `4(d² + d)`; one feed-forward unit: `dF + F + Fd + d`;
///   one layer norm: `2d`;
/// - encoder block: `2·ln + attn + ff`; there are `2L` of them (rally and
///   player stacks);
/// - decoder block: `3·ln + 3·attn + ff + gate (3d² + d)`; there are `L`;
/// - final layer norm `2d`, heads `Σ (d·V + V)` over the seven heads, where
///   the area head has `V = 5`.
pub fn param_count(config: &ModelConfig, vocab: &VocabSizes) -> usize {
    let d = config.dim;
    let f = config.ff_hidden();
    let attn = 4 * (d * d + d);
    let ff = d * f + f + f * d + d;
    let ln = 2 * d;

    let embeddings = (vocab.shot_type + vocab.context_total()) * d
        + vocab.context_total() * d
        + (2 * d + d);
    let encoder_block = 2 * ln + attn + ff;
    let decoder_block = 3 * ln + 3 * attn + ff + (3 * d * d + d);
    let heads: usize = [
        vocab.shot_type,
        5,
        vocab.aroundhead,
        vocab.backhand,
        vocab.landing_height,
        vocab.player_location,
        vocab.opponent_location,
    ]
    .iter()
    .map(|v| d * v + v)
    .sum();

    embeddings + 2 * config.layers * encoder_block + config.layers * decoder_block + ln + heads
}
