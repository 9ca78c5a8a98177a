//! Stroke-log CSV reading and writing.
//!
//! Rows are grouped by rally id in first-seen order. Within a rally,
//! `ball_round` must cover 1..=n with no gaps or duplicates, and the two
//! players must strictly alternate.

use std::collections::HashMap;
use std::io;

use indexmap::IndexMap;

use super::types::{Rally, Stroke};
use crate::{Error, Result};

/// Column names for the stroke-log layout. `Default` matches the common
/// public stroke datasets; override fields to adapt other exports.
#[derive(Debug, Clone)]
pub struct CsvSchema {
    pub rally: String,
    pub ball_round: String,
    pub player: String,
    pub shot_type: String,
    pub aroundhead: String,
    pub backhand: String,
    pub landing_height: String,
    pub landing_x: String,
    pub landing_y: String,
    pub player_location_area: String,
    pub opponent_location_area: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            rally: "rally".into(),
            ball_round: "ball_round".into(),
            player: "player".into(),
            shot_type: "type".into(),
            aroundhead: "aroundhead".into(),
            backhand: "backhand".into(),
            landing_height: "landing_height".into(),
            landing_x: "landing_x".into(),
            landing_y: "landing_y".into(),
            player_location_area: "player_location_area".into(),
            opponent_location_area: "opponent_location_area".into(),
        }
    }
}

struct ColumnIndices {
    rally: usize,
    ball_round: usize,
    player: usize,
    shot_type: usize,
    aroundhead: usize,
    backhand: usize,
    landing_height: usize,
    landing_x: usize,
    landing_y: usize,
    player_location_area: usize,
    opponent_location_area: usize,
}

impl ColumnIndices {
    fn resolve(headers: &csv::StringRecord, schema: &CsvSchema) -> Result<Self> {
        let mut by_name = HashMap::new();
        for (i, h) in headers.iter().enumerate() {
            by_name.insert(h.trim().to_string(), i);
        }
        let find = |name: &str| {
            by_name
                .get(name)
                .copied()
                .ok_or_else(|| Error::MissingColumn(name.to_string()))
        };
        Ok(ColumnIndices {
            rally: find(&schema.rally)?,
            ball_round: find(&schema.ball_round)?,
            player: find(&schema.player)?,
            shot_type: find(&schema.shot_type)?,
            aroundhead: find(&schema.aroundhead)?,
            backhand: find(&schema.backhand)?,
            landing_height: find(&schema.landing_height)?,
            landing_x: find(&schema.landing_x)?,
            landing_y: find(&schema.landing_y)?,
            player_location_area: find(&schema.player_location_area)?,
            opponent_location_area: find(&schema.opponent_location_area)?,
        })
    }
}

fn field<'r>(record: &'r csv::StringRecord, idx: usize, line: u64, name: &str) -> Result<&'r str> {
    record.get(idx).map(str::trim).ok_or_else(|| Error::Row {
        line,
        message: format!("missing field {name:?}"),
    })
}

fn parse_f64(raw: &str, line: u64, name: &str) -> Result<f64> {
    let value: f64 = raw.parse().map_err(|_| Error::Row {
        line,
        message: format!("{name} is not a number: {raw:?}"),
    })?;
    if !value.is_finite() {
        return Err(Error::Row {
            line,
            message: format!("{name} is not finite: {raw:?}"),
        });
    }
    Ok(value)
}

/// Parses a stroke-log CSV into rallies, validating per-rally structure.
pub fn parse_dataset<R: io::Read>(reader: R, schema: &CsvSchema) -> Result<Vec<Rally>> {
    let mut csv_reader = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = csv_reader.headers()?.clone();
    let cols = ColumnIndices::resolve(&headers, schema)?;

    let mut grouped: IndexMap<String, Vec<Stroke>> = IndexMap::new();
    for record in csv_reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);

        let rally = field(&record, cols.rally, line, &schema.rally)?.to_string();
        if rally.is_empty() {
            return Err(Error::Row {
                line,
                message: "empty rally id".into(),
            });
        }
        let ball_round_raw = field(&record, cols.ball_round, line, &schema.ball_round)?;
        let ball_round: u32 = ball_round_raw.parse().map_err(|_| Error::Row {
            line,
            message: format!("ball_round is not a positive integer: {ball_round_raw:?}"),
        })?;
        if ball_round == 0 {
            return Err(Error::Row {
                line,
                message: "ball_round must start at 1".into(),
            });
        }

        let stroke = Stroke {
            ball_round,
            player: field(&record, cols.player, line, &schema.player)?.to_string(),
            shot_type: field(&record, cols.shot_type, line, &schema.shot_type)?.to_string(),
            aroundhead: field(&record, cols.aroundhead, line, &schema.aroundhead)?.to_string(),
            backhand: field(&record, cols.backhand, line, &schema.backhand)?.to_string(),
            landing_height: field(&record, cols.landing_height, line, &schema.landing_height)?
                .to_string(),
            landing_x: parse_f64(
                field(&record, cols.landing_x, line, &schema.landing_x)?,
                line,
                &schema.landing_x,
            )?,
            landing_y: parse_f64(
                field(&record, cols.landing_y, line, &schema.landing_y)?,
                line,
                &schema.landing_y,
            )?,
            player_location_area: field(
                &record,
                cols.player_location_area,
                line,
                &schema.player_location_area,
            )?
            .to_string(),
            opponent_location_area: field(
                &record,
                cols.opponent_location_area,
                line,
                &schema.opponent_location_area,
            )?
            .to_string(),
        };
        grouped.entry(rally).or_default().push(stroke);
    }

    let mut rallies = Vec::with_capacity(grouped.len());
    for (id, mut strokes) in grouped {
        strokes.sort_by_key(|s| s.ball_round);
        validate_rally(&id, &strokes)?;
        rallies.push(Rally { id, strokes });
    }
    Ok(rallies)
}

fn validate_rally(id: &str, strokes: &[Stroke]) -> Result<()> {
    for (i, stroke) in strokes.iter().enumerate() {
        let expected = (i + 1) as u32;
        if stroke.ball_round != expected {
            let message = if i > 0 && strokes[i - 1].ball_round == stroke.ball_round {
                format!("duplicate ball_round {}", stroke.ball_round)
            } else {
                format!(
                    "ball_round gap: expected {expected}, found {}",
                    stroke.ball_round
                )
            };
            return Err(Error::Rally {
                rally: id.to_string(),
                message,
            });
        }
    }
    if strokes.len() >= 2 {
        let a = &strokes[0].player;
        let b = &strokes[1].player;
        if a == b {
            return Err(Error::Rally {
                rally: id.to_string(),
                message: format!("players do not alternate: {a:?} hits twice in a row"),
            });
        }
        for (i, stroke) in strokes.iter().enumerate() {
            let expected = if i % 2 == 0 { a } else { b };
            if &stroke.player != expected {
                return Err(Error::Rally {
                    rally: id.to_string(),
                    message: format!(
                        "players do not alternate: stroke {} hit by {:?}, expected {:?}",
                        i + 1,
                        stroke.player,
                        expected
                    ),
                });
            }
        }
    }
    Ok(())
}

/// Writes rallies back out in the same CSV layout `parse_dataset` reads.
pub fn write_dataset<W: io::Write>(rallies: &[Rally], writer: W, schema: &CsvSchema) -> Result<()> {
    let mut csv_writer = csv::Writer::from_writer(writer);
    csv_writer.write_record([
        schema.rally.as_str(),
        schema.ball_round.as_str(),
        schema.player.as_str(),
        schema.shot_type.as_str(),
        schema.aroundhead.as_str(),
        schema.backhand.as_str(),
        schema.landing_height.as_str(),
        schema.landing_x.as_str(),
        schema.landing_y.as_str(),
        schema.player_location_area.as_str(),
        schema.opponent_location_area.as_str(),
    ])?;
    for rally in rallies {
        for stroke in &rally.strokes {
            csv_writer.write_record([
                rally.id.as_str(),
                &stroke.ball_round.to_string(),
                stroke.player.as_str(),
                stroke.shot_type.as_str(),
                stroke.aroundhead.as_str(),
                stroke.backhand.as_str(),
                stroke.landing_height.as_str(),
                &format_coord(stroke.landing_x),
                &format_coord(stroke.landing_y),
                stroke.player_location_area.as_str(),
                stroke.opponent_location_area.as_str(),
            ])?;
        }
    }
    csv_writer.flush()?;
    Ok(())
}

fn format_coord(value: f64) -> String {
    let mut s = format!("{value}");
    if !s.contains('.') && !s.contains('e') && !s.contains("inf") && !s.contains("NaN") {
        s.push_str(".0");
    }
    s
}
