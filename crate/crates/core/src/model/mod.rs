//! The stroke forecaster: multi-input embeddings, rally and player
//! encoder-decoder stacks with position-aware gated fusion, seven
//! prediction heads, candidate generation, and checkpointing.

mod checkpoint;
mod config;
mod generate;
mod input;
mod net;
pub mod pos;

pub use checkpoint::Checkpoint;
pub use config::{param_count, ModelConfig, VocabSizes};
pub use generate::{Candidate, CandidateSet, DecodeMode, GeneratedStroke};
pub use input::{prepare_dataset, prepare_rally, PreparedRally, StrokeIds, PREFIX_LEN};
pub use net::{AreaParams, Forward, HeadVars, Memories, Model};
