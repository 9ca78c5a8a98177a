//! Aggregated evaluation results over a dataset.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::metric::score::RallyScore;
use crate::{Error, Result};

pub const REPORT_VERSION: u32 = 1;

/// Dataset-level means. Shot and area losses come from each rally's best
/// candidate, so `total_loss = shot_loss + area_loss` holds exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub total_loss: f64,
    pub shot_loss: f64,
    pub area_loss: f64,
}

/// Full evaluation record: one entry per rally plus the aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub format_version: u32,
    pub n_rallies: usize,
    pub aggregate: Aggregate,
    pub clamped_probabilities: u64,
    pub rallies: Vec<RallyScore>,
}

impl MetricReport {
    /// Builds the report, averaging per-rally scores arithmetically.
    pub fn from_rallies(rallies: Vec<RallyScore>) -> Result<MetricReport> {
        if rallies.is_empty() {
            return Err(Error::Config("cannot aggregate zero rallies".into()));
        }
        let n = rallies.len() as f64;
        let shot_loss = rallies.iter().map(|r| r.shot_loss).sum::<f64>() / n;
        let area_loss = rallies.iter().map(|r| r.area_loss).sum::<f64>() / n;
        let total_loss = rallies.iter().map(|r| r.score).sum::<f64>() / n;
        let clamped = rallies.iter().map(|r| r.clamped).sum();
        Ok(MetricReport {
            format_version: REPORT_VERSION,
            n_rallies: rallies.len(),
            aggregate: Aggregate {
                total_loss,
                shot_loss,
                area_loss,
            },
            clamped_probabilities: clamped,
            rallies,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path)?;
        serde_json::to_writer_pretty(BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<MetricReport> {
        let file = File::open(path)?;
        let report: MetricReport = serde_json::from_reader(BufReader::new(file))?;
        if report.format_version != REPORT_VERSION {
            return Err(Error::Config(format!(
                "unsupported report version {}",
                report.format_version
            )));
        }
        Ok(report)
    }
}
