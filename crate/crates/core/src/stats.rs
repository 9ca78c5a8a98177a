//! Association statistics between categorical stroke features.
//!
//! Association strength is Cramér's V, `sqrt((chi2 / n) / min(r - 1, c - 1))`,
//! computed from a contingency table over observed value pairs.

use std::collections::BTreeSet;
use std::io;

use crate::ingest::{Feature, Rally};
use crate::{Error, Result};

/// A two-way contingency table of observed counts. Both dimensions must
/// have at least two levels and every level must have a nonzero total;
/// [`ContingencyTable::from_pairs`] guarantees this by construction since
/// it only creates levels it observed.
#[derive(Debug, Clone)]
pub struct ContingencyTable {
    rows: usize,
    cols: usize,
    counts: Vec<u64>,
    n: u64,
}

impl ContingencyTable {
    pub fn new(counts: Vec<Vec<u64>>) -> Result<ContingencyTable> {
        let rows = counts.len();
        let cols = counts.first().map(Vec::len).unwrap_or(0);
        if rows < 2 || cols < 2 {
            return Err(Error::Contingency(format!(
                "table must be at least 2x2, got {rows}x{cols}"
            )));
        }
        if counts.iter().any(|row| row.len() != cols) {
            return Err(Error::Contingency("ragged count rows".into()));
        }
        let flat: Vec<u64> = counts.into_iter().flatten().collect();
        let n: u64 = flat.iter().sum();
        if n == 0 {
            return Err(Error::Contingency("table has no observations".into()));
        }
        for r in 0..rows {
            if (0..cols).map(|c| flat[r * cols + c]).sum::<u64>() == 0 {
                return Err(Error::Contingency(format!("row {r} has zero total")));
            }
        }
        for c in 0..cols {
            if (0..rows).map(|r| flat[r * cols + c]).sum::<u64>() == 0 {
                return Err(Error::Contingency(format!("column {c} has zero total")));
            }
        }
        Ok(ContingencyTable {
            rows,
            cols,
            counts: flat,
            n,
        })
    }

    /// Builds a table from raw value pairs. Levels are the observed
    /// distinct values of each variable, ordered lexicographically.
    pub fn from_pairs<'a, I>(pairs: I) -> Result<ContingencyTable>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let pairs: Vec<(&str, &str)> = pairs.into_iter().collect();
        let row_levels: Vec<&str> = pairs
            .iter()
            .map(|(a, _)| *a)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let col_levels: Vec<&str> = pairs
            .iter()
            .map(|(_, b)| *b)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if row_levels.len() < 2 || col_levels.len() < 2 {
            return Err(Error::Contingency(format!(
                "need at least two levels per variable, got {}x{}",
                row_levels.len(),
                col_levels.len()
            )));
        }
        let row_index = |v: &str| row_levels.binary_search(&v).unwrap();
        let col_index = |v: &str| col_levels.binary_search(&v).unwrap();
        let mut counts = vec![vec![0u64; col_levels.len()]; row_levels.len()];
        for (a, b) in pairs {
            counts[row_index(a)][col_index(b)] += 1;
        }
        ContingencyTable::new(counts)
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn chi_square(&self) -> f64 {
        let n = self.n as f64;
        let row_sums: Vec<f64> = (0..self.rows)
            .map(|r| (0..self.cols).map(|c| self.counts[r * self.cols + c] as f64).sum())
            .collect();
        let col_sums: Vec<f64> = (0..self.cols)
            .map(|c| (0..self.rows).map(|r| self.counts[r * self.cols + c] as f64).sum())
            .collect();
        let mut chi2 = 0.0;
        for (r, row_sum) in row_sums.iter().enumerate() {
            for (c, col_sum) in col_sums.iter().enumerate() {
                let expected = row_sum * col_sum / n;
                let observed = self.counts[r * self.cols + c] as f64;
                let diff = observed - expected;
                chi2 += diff * diff / expected;
            }
        }
        chi2
    }

    pub fn cramers_v(&self) -> f64 {
        let denominator = (self.rows - 1).min(self.cols - 1) as f64;
        ((self.chi_square() / self.n as f64) / denominator).sqrt()
    }
}

/// Pairwise Cramér's V over a feature set. The matrix is symmetric with a
/// unit diagonal; features with fewer than two observed levels are left
/// out and listed in `excluded`.
#[derive(Debug, Clone)]
pub struct AssociationMatrix {
    pub features: Vec<Feature>,
    values: Vec<f64>,
    pub excluded: Vec<(Feature, String)>,
}

impl AssociationMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.features.len() + j]
    }

    pub fn to_csv<W: io::Write>(&self, writer: W) -> Result<()> {
        let mut csv_writer = csv::Writer::from_writer(writer);
        let mut header = vec!["feature".to_string()];
        header.extend(self.features.iter().map(|f| f.name().to_string()));
        csv_writer.write_record(&header)?;
        for (i, feature) in self.features.iter().enumerate() {
            let mut record = vec![feature.name().to_string()];
            record.extend((0..self.features.len()).map(|j| format!("{:.6}", self.get(i, j))));
            csv_writer.write_record(&record)?;
        }
        csv_writer.flush()?;
        Ok(())
    }

    /// Plain-text table for console output.
    pub fn render(&self) -> String {
        let width = self
            .features
            .iter()
            .map(|f| f.name().len())
            .max()
            .unwrap_or(0)
            .max(8);
        let mut out = format!("{:width$}", "");
        for feature in &self.features {
            out.push_str(&format!("  {:>width$}", feature.name()));
        }
        out.push('\n');
        for (i, feature) in self.features.iter().enumerate() {
            out.push_str(&format!("{:width$}", feature.name()));
            for j in 0..self.features.len() {
                out.push_str(&format!("  {:>width$.4}", self.get(i, j)));
            }
            out.push('\n');
        }
        for (feature, reason) in &self.excluded {
            out.push_str(&format!("excluded {feature}: {reason}\n"));
        }
        out
    }
}

/// Computes pairwise Cramér's V between the requested features over every
/// stroke in the dataset.
pub fn association_matrix(rallies: &[Rally], features: &[Feature]) -> Result<AssociationMatrix> {
    if features.is_empty() {
        return Err(Error::Config("no features requested".into()));
    }
    let mut distinct = features.to_vec();
    distinct.dedup();
    if distinct.len() != features.len() {
        return Err(Error::Config("duplicate feature in request".into()));
    }

    let mut kept = Vec::new();
    let mut excluded = Vec::new();
    for &feature in features {
        let levels: BTreeSet<&str> = rallies
            .iter()
            .flat_map(|r| r.strokes.iter())
            .map(|s| s.feature(feature))
            .collect();
        if levels.len() < 2 {
            excluded.push((
                feature,
                format!("only {} observed level(s)", levels.len()),
            ));
        } else {
            kept.push(feature);
        }
    }
    if kept.len() < 2 {
        return Err(Error::Config(format!(
            "need at least two features with two or more levels, found {}",
            kept.len()
        )));
    }

    let k = kept.len();
    let mut values = vec![0.0; k * k];
    for i in 0..k {
        values[i * k + i] = 1.0;
        for j in i + 1..k {
            let pairs = rallies
                .iter()
                .flat_map(|r| r.strokes.iter())
                .map(|s| (s.feature(kept[i]), s.feature(kept[j])));
            let v = ContingencyTable::from_pairs(pairs)?.cramers_v();
            values[i * k + j] = v;
            values[j * k + i] = v;
        }
    }
    Ok(AssociationMatrix {
        features: kept,
        values,
        excluded,
    })
}
