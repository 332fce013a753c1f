//! Soft relevance scoring toolkit.
//!
//! Categorical domain labels map to hard relevance scores, get smoothed off
//! the `{0, 1}` boundary, and are diffused into per-document soft scores by
//! sampling a fixed-concentration Beta distribution. The resulting datasets
//! train two desk-scale scorers (direct regression, and classify-then-score),
//! which are evaluated with tolerance-gated metrics and used to score LLM
//! responses in a benchmark loop.
//!
//! Data-parallel loops go through [`par`]; build without the default
//! `parallel` feature for a purely sequential library.

pub mod bench;
pub mod beta_diffusion;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod hashing;
pub mod par;
pub mod relevance_map;
pub mod rng;
pub mod scorer;
pub mod special;
pub mod synthetic;

pub use error::{Error, Result};
