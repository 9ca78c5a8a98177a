//! Dataset evaluation: generate six candidate continuations per rally,
//! score them against the ground truth and aggregate.

use rayon::prelude::*;

use crate::metric::report::MetricReport;
use crate::metric::score::{score, TruthStep, N_CANDIDATES};
use crate::model::{CandidateSet, DecodeMode, Model, PreparedRally, PREFIX_LEN};
use crate::train::pool::thread_pool;
use crate::{Error, Result};

/// Generates the six scored candidates for every rally. Rallies are
/// processed in parallel but the output order matches the input.
pub fn generate_candidates(
    model: &Model,
    rallies: &[PreparedRally],
    seed: u64,
    mode: &DecodeMode,
) -> Result<Vec<CandidateSet>> {
    if rallies.is_empty() {
        return Err(Error::Config("no rallies to evaluate".into()));
    }
    thread_pool().install(|| {
        rallies
            .par_iter()
            .map(|rally| {
                let target_len = rally.len() - PREFIX_LEN;
                model.generate(
                    &rally.id,
                    rally.prefix(),
                    target_len,
                    N_CANDIDATES,
                    seed,
                    mode,
                )
            })
            .collect()
    })
}

/// Evaluates a model over prepared rallies: six candidates per rally,
/// rally score `min(l_1..l_6)` and dataset means over each rally's best
/// candidate.
pub fn evaluate_dataset(
    model: &Model,
    rallies: &[PreparedRally],
    seed: u64,
    mode: &DecodeMode,
) -> Result<MetricReport> {
    let sets = generate_candidates(model, rallies, seed, mode)?;
    let scores = thread_pool().install(|| {
        sets.par_iter()
            .zip(rallies.par_iter())
            .map(|(set, rally)| {
                let truth: Vec<TruthStep> =
                    rally.targets().iter().map(TruthStep::from_stroke).collect();
                score(set, &truth)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    MetricReport::from_rallies(scores)
}
