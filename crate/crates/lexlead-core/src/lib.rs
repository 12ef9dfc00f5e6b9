//! Semantic-change and source-leadership analysis for timestamped,
//! multi-source text corpora.
//!
//! The pipeline: build an encoded corpus ([`corpus`]), train decomposed
//! skipgram embeddings ([`embed`]), rank words by semantic change
//! ([`change`]), score lead/lag relations between sources against a
//! randomization null ([`lead`]), and aggregate accepted events into a
//! weighted influence network with centrality analytics ([`network`]).
//! [`synth`] generates corpora with planted ground truth for calibration.

pub mod binio;
pub mod corpus;
pub mod error;
pub mod rng;
pub mod vecmath;

pub use error::{Error, Result};
