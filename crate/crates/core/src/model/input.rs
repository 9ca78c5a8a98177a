//! Bridging parsed rallies to model inputs: vocabulary ids, normalized
//! coordinates, positional indices and actor assignment.

use crate::ingest::{CoordScaler, Feature, Rally, Vocabularies};
use crate::{Error, Result};

/// Number of ground-truth strokes every forecast is conditioned on.
pub const PREFIX_LEN: usize = 4;

/// One stroke reduced to model inputs. Coordinates are normalized to
/// `[0, 1]`; `position` is the 0-based index within the rally; `actor` is
/// 0 for the serving player and 1 for the receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrokeIds {
    pub shot_type: usize,
    pub aroundhead: usize,
    pub backhand: usize,
    pub height: usize,
    pub player_loc: usize,
    pub opponent_loc: usize,
    pub player: usize,
    pub x: f64,
    pub y: f64,
    pub position: usize,
    pub actor: usize,
}

/// A rally encoded for the model.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedRally {
    pub id: String,
    pub strokes: Vec<StrokeIds>,
}

impl PreparedRally {
    pub fn len(&self) -> usize {
        self.strokes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strokes.is_empty()
    }

    pub fn prefix(&self) -> &[StrokeIds] {
        &self.strokes[..PREFIX_LEN]
    }

    /// Decoder inputs under teacher forcing: strokes 4..n-1 (1-based),
    /// each predicting its successor.
    pub fn decoder_inputs(&self) -> &[StrokeIds] {
        &self.strokes[PREFIX_LEN - 1..self.strokes.len() - 1]
    }

    /// Ground-truth continuation: strokes 5..n (1-based).
    pub fn targets(&self) -> &[StrokeIds] {
        &self.strokes[PREFIX_LEN..]
    }
}

/// Encodes one rally. The rally must already carry normalized coordinates
/// (see [`CoordScaler::apply`]) and have at least `PREFIX_LEN + 1` strokes
/// so there is something to forecast.
pub fn prepare_rally(rally: &Rally, vocabs: &Vocabularies) -> Result<PreparedRally> {
    if rally.len() < PREFIX_LEN + 1 {
        return Err(Error::Rally {
            rally: rally.id.clone(),
            message: format!(
                "needs at least {} strokes to forecast, has {}",
                PREFIX_LEN + 1,
                rally.len()
            ),
        });
    }
    let players = rally.players()?;
    let mut strokes = Vec::with_capacity(rally.len());
    for (position, stroke) in rally.strokes.iter().enumerate() {
        if !(0.0..=1.0).contains(&stroke.landing_x) || !(0.0..=1.0).contains(&stroke.landing_y) {
            return Err(Error::Rally {
                rally: rally.id.clone(),
                message: format!(
                    "stroke {} has unnormalized coordinates ({}, {})",
                    position + 1,
                    stroke.landing_x,
                    stroke.landing_y
                ),
            });
        }
        let actor = usize::from(stroke.player != players[0]);
        strokes.push(StrokeIds {
            shot_type: vocabs.get(Feature::ShotType).encode(&stroke.shot_type),
            aroundhead: vocabs.get(Feature::Aroundhead).encode(&stroke.aroundhead),
            backhand: vocabs.get(Feature::Backhand).encode(&stroke.backhand),
            height: vocabs
                .get(Feature::LandingHeight)
                .encode(&stroke.landing_height),
            player_loc: vocabs
                .get(Feature::PlayerLocationArea)
                .encode(&stroke.player_location_area),
            opponent_loc: vocabs
                .get(Feature::OpponentLocationArea)
                .encode(&stroke.opponent_location_area),
            player: vocabs.get(Feature::Player).encode(&stroke.player),
            x: stroke.landing_x,
            y: stroke.landing_y,
            position,
            actor,
        });
    }
    Ok(PreparedRally {
        id: rally.id.clone(),
        strokes,
    })
}

/// Normalizes and encodes a whole dataset, dropping rallies too short to
/// forecast. Returns the prepared rallies, the number of dropped rallies
/// and the number of clamped strokes.
pub fn prepare_dataset(
    rallies: &[Rally],
    vocabs: &Vocabularies,
    scaler: &CoordScaler,
) -> Result<(Vec<PreparedRally>, usize, u64)> {
    let mut normalized = rallies.to_vec();
    let clamped = scaler.apply(&mut normalized);
    let mut prepared = Vec::with_capacity(normalized.len());
    let mut dropped = 0;
    for rally in &normalized {
        if rally.len() < PREFIX_LEN + 1 {
            dropped += 1;
            continue;
        }
        prepared.push(prepare_rally(rally, vocabs)?);
    }
    Ok((prepared, dropped, clamped))
}
