//! CSV export of generated candidates, one row per predicted stroke.

use std::io::Write;

use crate::ingest::{CoordScaler, Vocabulary};
use crate::model::{CandidateSet, PREFIX_LEN};
use crate::{Error, Result};

/// Writes every candidate stroke with its full shot-type distribution.
/// Columns: `rally_id`, `sample_id` (1-based candidate index),
/// `ball_round` (1-based position in the rally, so forecasts start at
/// round 5), one probability column per shot-type vocabulary entry, then
/// the landing spot in normalized and, via the scaler, raw units.
pub fn write_predictions_csv<W: Write>(
    sets: &[CandidateSet],
    shot_vocab: &Vocabulary,
    scaler: &CoordScaler,
    writer: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![
        "rally_id".to_string(),
        "sample_id".to_string(),
        "ball_round".to_string(),
    ];
    for id in 0..shot_vocab.size() {
        header.push(format!("prob_{}", shot_vocab.decode(id)));
    }
    header.extend([
        "landing_x".to_string(),
        "landing_y".to_string(),
        "landing_x_raw".to_string(),
        "landing_y_raw".to_string(),
    ]);
    w.write_record(&header)?;

    for set in sets {
        for (candidate_index, candidate) in set.candidates.iter().enumerate() {
            for (step, stroke) in candidate.strokes.iter().enumerate() {
                if stroke.shot_probs.len() != shot_vocab.size() {
                    return Err(Error::Config(format!(
                        "rally {}: stroke distribution has {} entries, vocabulary has {}",
                        set.rally_id,
                        stroke.shot_probs.len(),
                        shot_vocab.size()
                    )));
                }
                let mut row = vec![
                    set.rally_id.clone(),
                    (candidate_index + 1).to_string(),
                    (PREFIX_LEN + step + 1).to_string(),
                ];
                for &p in &stroke.shot_probs {
                    row.push(p.to_string());
                }
                let (raw_x, raw_y) = scaler.invert_point(stroke.x, stroke.y);
                row.push(stroke.x.to_string());
                row.push(stroke.y.to_string());
                row.push(raw_x.to_string());
                row.push(raw_y.to_string());
                w.write_record(&row)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
