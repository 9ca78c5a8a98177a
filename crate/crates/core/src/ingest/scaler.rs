//! Min-max normalization of landing coordinates to the unit square.

use serde::{Deserialize, Serialize};

use super::types::Rally;
use crate::{Error, Result};

/// Per-axis min-max ranges fitted on training data. Application clamps out
/// of range points to `[0, 1]` and reports how many were clamped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoordScaler {
    pub min_x: f64,
    pub max_x: f64,
    pub min_y: f64,
    pub max_y: f64,
}

impl CoordScaler {
    pub fn fit(rallies: &[Rally]) -> Result<CoordScaler> {
        let mut min_x = f64::INFINITY;
        let mut max_x = f64::NEG_INFINITY;
        let mut min_y = f64::INFINITY;
        let mut max_y = f64::NEG_INFINITY;
        for rally in rallies {
            for stroke in &rally.strokes {
                min_x = min_x.min(stroke.landing_x);
                max_x = max_x.max(stroke.landing_x);
                min_y = min_y.min(stroke.landing_y);
                max_y = max_y.max(stroke.landing_y);
            }
        }
        let scaler = CoordScaler {
            min_x,
            max_x,
            min_y,
            max_y,
        };
        scaler.validate()?;
        Ok(scaler)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min_x.is_finite() && self.max_x.is_finite())
            || !(self.min_y.is_finite() && self.max_y.is_finite())
        {
            return Err(Error::Config(
                "coordinate scaler needs at least one stroke to fit".into(),
            ));
        }
        if self.max_x <= self.min_x || self.max_y <= self.min_y {
            return Err(Error::Config(format!(
                "degenerate coordinate range: x [{}, {}], y [{}, {}]",
                self.min_x, self.max_x, self.min_y, self.max_y
            )));
        }
        Ok(())
    }

    /// Maps a raw point into `[0, 1]^2`. The flag reports whether clamping
    /// was needed on either axis.
    pub fn apply_point(&self, x: f64, y: f64) -> (f64, f64, bool) {
        let nx = (x - self.min_x) / (self.max_x - self.min_x);
        let ny = (y - self.min_y) / (self.max_y - self.min_y);
        let clamped = !(0.0..=1.0).contains(&nx) || !(0.0..=1.0).contains(&ny);
        (nx.clamp(0.0, 1.0), ny.clamp(0.0, 1.0), clamped)
    }

    /// Maps a normalized point back to raw units.
    pub fn invert_point(&self, nx: f64, ny: f64) -> (f64, f64) {
        (
            self.min_x + nx * (self.max_x - self.min_x),
            self.min_y + ny * (self.max_y - self.min_y),
        )
    }

    /// Normalizes every landing coordinate in place, returning the number
    /// of strokes that needed clamping.
    pub fn apply(&self, rallies: &mut [Rally]) -> u64 {
        let mut clamped_strokes = 0;
        for rally in rallies {
            for stroke in &mut rally.strokes {
                let (nx, ny, clamped) = self.apply_point(stroke.landing_x, stroke.landing_y);
                stroke.landing_x = nx;
                stroke.landing_y = ny;
                if clamped {
                    clamped_strokes += 1;
                }
            }
        }
        clamped_strokes
    }
}
