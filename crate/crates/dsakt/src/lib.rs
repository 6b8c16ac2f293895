//! DSAKT: an encoder-decoder self-attention network for knowledge tracing.
//!
//! Given a student's interaction history, the model predicts the probability
//! that the next exercise is answered correctly. The crate bundles the whole
//! workflow: log ingestion, synthetic students with an exact Bayes oracle,
//! the network itself with hand-derived gradients, Adam training under a
//! Noam schedule, ranking metrics, and attention-weight export.

pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod kernel;
pub mod model;
pub mod train;

pub use error::{Error, Result};
