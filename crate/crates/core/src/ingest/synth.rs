//! Synthetic rally generator.
//!
//! Shot types follow a first-order Markov chain; landing coordinates are
//! drawn from per-type bivariate Gaussians in raw units; the auxiliary
//! categoricals are tied to the shot type through coupling knobs so tests
//! can dial association strength from deterministic to independent.

use rand::Rng;

use super::types::{Rally, Stroke};
use crate::{seeds, Error, Result};

/// Knobs for the synthetic generator. All couplings and noise levels are
/// probabilities in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub n_players: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub shot_types: Vec<String>,
    /// Row-stochastic matrix: `transition[i][j]` is the probability that
    /// type `j` follows type `i`.
    pub transition: Vec<Vec<f64>>,
    /// Raw-unit landing mean per shot type.
    pub coord_means: Vec<(f64, f64)>,
    pub coord_std: (f64, f64),
    pub height_levels: usize,
    /// Probability that `landing_height` ignores the shot type and is
    /// drawn uniformly. Zero makes the height a deterministic function of
    /// the type.
    pub height_noise: f64,
    /// Probability that `aroundhead` follows its type-determined value
    /// instead of a fair coin.
    pub aroundhead_coupling: f64,
    /// Probability that `backhand` follows its type-determined value
    /// instead of a fair coin.
    pub backhand_coupling: f64,
    pub area_count: usize,
    /// Probability that a location area ignores the shot type and is
    /// drawn uniformly.
    pub area_noise: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let shot_types: Vec<String> = ["clear", "drive", "drop", "lob", "net", "smash"]
            .into_iter()
            .map(str::to_string)
            .collect();
        let v = shot_types.len();
        let mut transition = vec![vec![0.05; v]; v];
        for (i, row) in transition.iter_mut().enumerate() {
            row[(i + 1) % v] = 0.5;
            row[(i + 3) % v] = 0.3;
        }
        let coord_means = (0..v)
            .map(|i| {
                let col = (i % 3) as f64;
                let row = (i / 3) as f64;
                (60.0 + 90.0 * col, 150.0 + 120.0 * row)
            })
            .collect();
        SynthConfig {
            n_players: 4,
            min_len: 5,
            max_len: 12,
            shot_types,
            transition,
            coord_means,
            coord_std: (25.0, 35.0),
            height_levels: 3,
            height_noise: 0.0,
            aroundhead_coupling: 0.6,
            backhand_coupling: 0.6,
            area_count: 4,
            area_noise: 0.2,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_players < 2 {
            return Err(Error::Config(format!(
                "need at least 2 players, got {}",
                self.n_players
            )));
        }
        if self.min_len == 0 || self.max_len < self.min_len {
            return Err(Error::Config(format!(
                "invalid rally length range [{}, {}]",
                self.min_len, self.max_len
            )));
        }
        let v = self.shot_types.len();
        if v < 2 {
            return Err(Error::Config("need at least 2 shot types".into()));
        }
        if self.transition.len() != v {
            return Err(Error::Config(format!(
                "transition matrix has {} rows for {v} shot types",
                self.transition.len()
            )));
        }
        for (i, row) in self.transition.iter().enumerate() {
            if row.len() != v {
                return Err(Error::Config(format!(
                    "transition row {i} has {} entries, expected {v}",
                    row.len()
                )));
            }
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(Error::Config(format!(
                    "transition row {i} has probabilities outside [0, 1]"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!(
                    "transition row {i} sums to {sum}, expected 1"
                )));
            }
        }
        if self.coord_means.len() != v {
            return Err(Error::Config(format!(
                "{} coordinate means for {v} shot types",
                self.coord_means.len()
            )));
        }
        if self.coord_std.0 <= 0.0 || self.coord_std.1 <= 0.0 {
            return Err(Error::Config("coordinate std must be positive".into()));
        }
        if self.height_levels == 0 || self.area_count == 0 {
            return Err(Error::Config(
                "height_levels and area_count must be positive".into(),
            ));
        }
        for (name, p) in [
            ("height_noise", self.height_noise),
            ("aroundhead_coupling", self.aroundhead_coupling),
            ("backhand_coupling", self.backhand_coupling),
            ("area_noise", self.area_noise),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must be in [0, 1], got {p}")));
            }
        }
        Ok(())
    }

    /// Stationary distribution of the shot-type chain, found by power
    /// iteration from the uniform distribution.
    pub fn stationary_distribution(&self) -> Vec<f64> {
        let v = self.shot_types.len();
        let mut dist = vec![1.0 / v as f64; v];
        for _ in 0..10_000 {
            let mut next = vec![0.0; v];
            for (i, &p) in dist.iter().enumerate() {
                for (j, slot) in next.iter_mut().enumerate() {
                    *slot += p * self.transition[i][j];
                }
            }
            let delta: f64 = dist
                .iter()
                .zip(&next)
                .map(|(a, b)| (a - b).abs())
                .sum();
            dist = next;
            if delta < 1e-13 {
                break;
            }
        }
        dist
    }
}

fn sample_categorical<R: Rng>(rng: &mut R, probs: &[f64]) -> usize {
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

/// Generates `n_rallies` synthetic rallies, fully determined by the seed
/// and config.
pub fn generate_synthetic(n_rallies: usize, seed: u64, config: &SynthConfig) -> Result<Vec<Rally>> {
    config.validate()?;
    let mut rng = seeds::stream(seed, "synth");
    let stationary = config.stationary_distribution();
    let players: Vec<String> = (1..=config.n_players).map(|i| format!("P{i:02}")).collect();

    let mut rallies = Vec::with_capacity(n_rallies);
    for rally_index in 0..n_rallies {
        let length = rng.random_range(config.min_len..=config.max_len);
        let server = rng.random_range(0..config.n_players);
        let mut receiver = rng.random_range(0..config.n_players - 1);
        if receiver >= server {
            receiver += 1;
        }

        let mut strokes = Vec::with_capacity(length);
        let mut shot = sample_categorical(&mut rng, &stationary);
        for round in 0..length {
            if round > 0 {
                shot = sample_categorical(&mut rng, &config.transition[shot]);
            }
            let (mean_x, mean_y) = config.coord_means[shot];
            let landing_x = mean_x + config.coord_std.0 * seeds::standard_normal(&mut rng);
            let landing_y = mean_y + config.coord_std.1 * seeds::standard_normal(&mut rng);

            let height = if rng.random::<f64>() < config.height_noise {
                rng.random_range(0..config.height_levels)
            } else {
                shot % config.height_levels
            };
            let aroundhead = if rng.random::<f64>() < config.aroundhead_coupling {
                (shot >> 1) & 1
            } else {
                usize::from(rng.random::<bool>())
            };
            let backhand = if rng.random::<f64>() < config.backhand_coupling {
                shot & 1
            } else {
                usize::from(rng.random::<bool>())
            };
            let player_area = if rng.random::<f64>() < config.area_noise {
                rng.random_range(0..config.area_count)
            } else {
                (2 * shot + 1) % config.area_count
            };
            let opponent_area = if rng.random::<f64>() < config.area_noise {
                rng.random_range(0..config.area_count)
            } else {
                (shot + 2) % config.area_count
            };

            let hitter = if round % 2 == 0 { server } else { receiver };
            strokes.push(Stroke {
                ball_round: (round + 1) as u32,
                player: players[hitter].clone(),
                shot_type: config.shot_types[shot].clone(),
                aroundhead: aroundhead.to_string(),
                backhand: backhand.to_string(),
                landing_height: (height + 1).to_string(),
                landing_x,
                landing_y,
                player_location_area: (player_area + 1).to_string(),
                opponent_location_area: (opponent_area + 1).to_string(),
            });
        }
        rallies.push(Rally {
            id: format!("r{:05}", rally_index + 1),
            strokes,
        });
    }
    Ok(rallies)
}
