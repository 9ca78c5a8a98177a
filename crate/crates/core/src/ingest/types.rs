//! Core dataset types: strokes, rallies, and the categorical feature set.

use crate::{Error, Result};

/// One stroke event inside a rally. Coordinates are kept in whatever units
/// the source used; [`crate::ingest::CoordScaler`] maps them to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Stroke {
    pub ball_round: u32,
    pub player: String,
    pub shot_type: String,
    pub aroundhead: String,
    pub backhand: String,
    pub landing_height: String,
    pub landing_x: f64,
    pub landing_y: f64,
    pub player_location_area: String,
    pub opponent_location_area: String,
}

/// A rally: an ordered stroke sequence between two alternating players.
#[derive(Debug, Clone, PartialEq)]
pub struct Rally {
    pub id: String,
    pub strokes: Vec<Stroke>,
}

impl Rally {
    pub fn len(&self) -> usize {
        self.strokes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strokes.is_empty()
    }

    /// The two players in hitting order: element 0 serves (hits stroke 1).
    pub fn players(&self) -> Result<[&str; 2]> {
        if self.strokes.len() < 2 {
            return Err(Error::Rally {
                rally: self.id.clone(),
                message: "needs at least two strokes to identify both players".into(),
            });
        }
        Ok([&self.strokes[0].player, &self.strokes[1].player])
    }
}

/// Categorical stroke features. Names match the default CSV column names
/// and are the identifiers accepted by the association tooling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Feature {
    ShotType,
    Player,
    Aroundhead,
    Backhand,
    LandingHeight,
    PlayerLocationArea,
    OpponentLocationArea,
}

pub const ALL_FEATURES: [Feature; 7] = [
    Feature::ShotType,
    Feature::Player,
    Feature::Aroundhead,
    Feature::Backhand,
    Feature::LandingHeight,
    Feature::PlayerLocationArea,
    Feature::OpponentLocationArea,
];

impl Feature {
    pub fn name(self) -> &'static str {
        match self {
            Feature::ShotType => "type",
            Feature::Player => "player",
            Feature::Aroundhead => "aroundhead",
            Feature::Backhand => "backhand",
            Feature::LandingHeight => "landing_height",
            Feature::PlayerLocationArea => "player_location_area",
            Feature::OpponentLocationArea => "opponent_location_area",
        }
    }

    pub fn parse(name: &str) -> Result<Feature> {
        ALL_FEATURES
            .iter()
            .copied()
            .find(|f| f.name() == name)
            .ok_or_else(|| {
                let valid: Vec<&str> = ALL_FEATURES.iter().map(|f| f.name()).collect();
                Error::Config(format!(
                    "unknown feature {name:?}; valid features: {}",
                    valid.join(", ")
                ))
            })
    }
}

impl std::fmt::Display for Feature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl Stroke {
    /// The value this stroke carries for a categorical feature.
    pub fn feature(&self, feature: Feature) -> &str {
        match feature {
            Feature::ShotType => &self.shot_type,
            Feature::Player => &self.player,
            Feature::Aroundhead => &self.aroundhead,
            Feature::Backhand => &self.backhand,
            Feature::LandingHeight => &self.landing_height,
            Feature::PlayerLocationArea => &self.player_location_area,
            Feature::OpponentLocationArea => &self.opponent_location_area,
        }
    }
}
