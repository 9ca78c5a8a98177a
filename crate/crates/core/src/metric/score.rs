//! Challenge scoring for one rally: each candidate continuation costs
//! cross entropy on shot types plus mean absolute error on landing spots,
//! and the rally score is the best candidate's cost.

use serde::{Deserialize, Serialize};

use crate::model::{CandidateSet, GeneratedStroke, StrokeIds};
use crate::{Error, Result};

/// Number of sampled continuations every rally is scored over.
pub const N_CANDIDATES: usize = 6;

/// Probabilities below this are clamped before taking the logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

/// Ground truth for one forecast step, in normalized coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthStep {
    pub shot_type: usize,
    pub x: f64,
    pub y: f64,
}

impl TruthStep {
    pub fn from_stroke(stroke: &StrokeIds) -> TruthStep {
        TruthStep {
            shot_type: stroke.shot_type,
            x: stroke.x,
            y: stroke.y,
        }
    }
}

/// Cost of one candidate: `l = ce + mae`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub ce: f64,
    pub mae: f64,
    pub l: f64,
}

/// Scores for one rally across all six candidates. `best_sample` counts
/// from 1 and matches the `sample_id` column of the predictions file;
/// `shot_loss` and `area_loss` are the CE and MAE of that candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RallyScore {
    pub rally_id: String,
    pub candidates: Vec<CandidateScore>,
    pub score: f64,
    pub best_sample: usize,
    pub shot_loss: f64,
    pub area_loss: f64,
    pub clamped: u64,
}

/// Costs one candidate against the truth. Cross entropy averages
/// `-ln p(true shot)` over steps, with probabilities clamped at
/// [`PROB_FLOOR`]; the returned counter says how often the clamp fired.
/// MAE averages `|dx|` and `|dy|` over steps and both axes, in normalized
/// units.
pub fn candidate_loss(
    strokes: &[GeneratedStroke],
    truth: &[TruthStep],
) -> Result<(CandidateScore, u64)> {
    if truth.is_empty() {
        return Err(Error::Config("cannot score an empty continuation".into()));
    }
    if strokes.len() != truth.len() {
        return Err(Error::Config(format!(
            "candidate has {} steps but truth has {}",
            strokes.len(),
            truth.len()
        )));
    }
    let m = truth.len() as f64;
    let mut ce_sum = 0.0;
    let mut abs_sum = 0.0;
    let mut clamped = 0u64;
    for (stroke, t) in strokes.iter().zip(truth) {
        let probs = &stroke.shot_probs;
        if t.shot_type >= probs.len() {
            return Err(Error::Config(format!(
                "true shot id {} is outside the candidate's {}-way distribution",
                t.shot_type,
                probs.len()
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::Config(format!(
                "candidate probabilities sum to {total}, not 1"
            )));
        }
        let p = probs[t.shot_type];
        if p < PROB_FLOOR {
            clamped += 1;
        }
        ce_sum += -p.max(PROB_FLOOR).ln();
        abs_sum += (stroke.x - t.x).abs() + (stroke.y - t.y).abs();
    }
    let ce = ce_sum / m;
    let mae = abs_sum / (2.0 * m);
    Ok((
        CandidateScore {
            ce,
            mae,
            l: ce + mae,
        },
        clamped,
    ))
}

/// Scores a rally: all six candidate costs, their minimum and which
/// candidate attained it (earliest wins ties).
pub fn score(set: &CandidateSet, truth: &[TruthStep]) -> Result<RallyScore> {
    if set.candidates.len() != N_CANDIDATES {
        return Err(Error::Config(format!(
            "rally {} has {} candidates; scoring requires exactly {N_CANDIDATES}",
            set.rally_id,
            set.candidates.len()
        )));
    }
    let mut candidates = Vec::with_capacity(N_CANDIDATES);
    let mut clamped = 0u64;
    for candidate in &set.candidates {
        let (cost, clamps) = candidate_loss(&candidate.strokes, truth)?;
        candidates.push(cost);
        clamped += clamps;
    }
    let mut best = 0;
    for (i, cost) in candidates.iter().enumerate() {
        if cost.l < candidates[best].l {
            best = i;
        }
    }
    Ok(RallyScore {
        rally_id: set.rally_id.clone(),
        score: candidates[best].l,
        best_sample: best + 1,
        shot_loss: candidates[best].ce,
        area_loss: candidates[best].mae,
        candidates,
        clamped,
    })
}
