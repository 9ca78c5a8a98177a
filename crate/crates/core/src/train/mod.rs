//! Training: the composite loss, length-bucketed batching, the Adam loop,
//! k-fold cross validation and grid search with loss selection.

mod batching;
mod cv;
mod grid;
mod loss;
pub mod pool;
mod trainer;

pub use batching::{length_batches, shuffled_batches};
pub use cv::{cross_validate, mean_and_sd, CvOutput, FoldOutcome};
pub use grid::{
    loss_selection, select_winners, write_grid_csv, GridPoint, GridResult, GridSpec,
    SelectionReport, Winner,
};
pub use loss::{composite_loss, LossBreakdown, StepTargets};
pub use trainer::{train, write_curve_csv, EpochRecord, TrainConfig, TrainOutput};
