//! Core library for rally stroke forecasting.
//!
//! The pipeline: parse stroke logs into rallies ([`ingest`]), check feature
//! association ([`stats`]), train a multi-input encoder-decoder forecaster
//! ([`model`], [`train`]) on a tape-based autodiff substrate ([`autodiff`]),
//! and score 6-candidate continuations with the min-of-candidates challenge
//! metric ([`metric`]).

pub mod autodiff;
pub mod error;
pub mod ingest;
pub mod metric;
pub mod model;
pub mod seeds;
pub mod stats;
pub mod train;

pub use error::{Error, Result};
