//! Streaming concept-drift detection from explanation shifts, with
//! entropy-gated feedback against spurious features.

pub mod detectors;
pub mod ebc;
pub mod error;
pub mod eval;
pub mod explain;
pub mod exstream;
pub mod learners;
pub mod streams;

pub use error::{Error, Result};
