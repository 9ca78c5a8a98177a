//! Rally-level cross-validation splits.

use rand::seq::SliceRandom;

use super::types::Rally;
use crate::{seeds, Error, Result};

/// One cross-validation fold: rally ids held out for evaluation and the
/// complementary training ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSplit {
    pub fold: usize,
    pub train_ids: Vec<String>,
    pub holdout_ids: Vec<String>,
}

/// Partitions rally ids into `k` disjoint folds whose sizes differ by at
/// most one. The assignment depends only on the set of ids and the seed,
/// not on input order.
pub fn split_folds(rallies: &[Rally], k: usize, seed: u64) -> Result<Vec<FoldSplit>> {
    if k < 2 {
        return Err(Error::Config(format!("k must be at least 2, got {k}")));
    }
    let mut ids: Vec<&str> = rallies.iter().map(|r| r.id.as_str()).collect();
    ids.sort_unstable();
    ids.dedup();
    let n = ids.len();
    if n < k {
        return Err(Error::Config(format!(
            "cannot split {n} rallies into {k} folds"
        )));
    }

    let mut rng = seeds::stream(seed, "folds");
    ids.shuffle(&mut rng);

    let base = n / k;
    let remainder = n % k;
    let mut folds: Vec<Vec<String>> = Vec::with_capacity(k);
    let mut cursor = 0;
    for fold in 0..k {
        let size = base + usize::from(fold < remainder);
        folds.push(
            ids[cursor..cursor + size]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        );
        cursor += size;
    }

    Ok((0..k)
        .map(|fold| {
            let holdout_ids = folds[fold].clone();
            let mut train_ids: Vec<String> = folds
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != fold)
                .flat_map(|(_, ids)| ids.iter().cloned())
                .collect();
            train_ids.sort_unstable();
            FoldSplit {
                fold,
                train_ids,
                holdout_ids,
            }
        })
        .collect())
}
