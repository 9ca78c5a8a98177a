//! Challenge metric: per-rally scores over six candidate continuations
//! and dataset-level aggregation.

mod evaluate;
mod predictions;
mod report;
mod score;

pub use evaluate::{evaluate_dataset, generate_candidates};
pub use predictions::write_predictions_csv;
pub use report::{Aggregate, MetricReport, REPORT_VERSION};
pub use score::{
    candidate_loss, score, CandidateScore, RallyScore, TruthStep, N_CANDIDATES, PROB_FLOOR,
};
