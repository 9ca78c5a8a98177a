//! Dataset ingestion: stroke-log CSV parsing, categorical vocabularies,
//! coordinate normalization, rally-level fold splitting, and a synthetic
//! rally generator for desk-scale testing.

mod folds;
mod parse;
mod scaler;
mod synth;
mod types;
mod vocab;

pub use folds::{split_folds, FoldSplit};
pub use parse::{parse_dataset, write_dataset, CsvSchema};
pub use scaler::CoordScaler;
pub use synth::{generate_synthetic, SynthConfig};
pub use types::{Feature, Rally, Stroke, ALL_FEATURES};
pub use vocab::{build_vocabularies, Vocabularies, Vocabulary, PAD_ID, UNK_ID};

use serde::{Deserialize, Serialize};

/// On-disk form of the fitted vocabularies and coordinate scaler, persisted
/// next to (and inside) checkpoints so evaluation uses identical units.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreprocessFile {
    pub format_version: u32,
    pub vocabularies: Vocabularies,
    pub scaler: CoordScaler,
}

impl PreprocessFile {
    pub const FORMAT_VERSION: u32 = 1;

    pub fn new(vocabularies: Vocabularies, scaler: CoordScaler) -> Self {
        PreprocessFile {
            format_version: Self::FORMAT_VERSION,
            vocabularies,
            scaler,
        }
    }
}
