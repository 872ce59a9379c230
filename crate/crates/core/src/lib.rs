//! Closed-form accessibility bounds for transformer-like sequence models.
//!
//! The crate counts how many distinguishable inputs a model with bounded
//! embeddings and finite precision can receive, and turns those counts into
//! limits on how many output sequences can be reached by prompting.
//! Quantities are astronomically large, so everything is carried in log space
//! (see [`LogCount`]).

// `!(x > 0.0)` style guards are deliberate: they reject NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cellvolume;
pub mod eo;
pub mod geometry;
pub mod logcount;
pub mod measures;
pub mod seed;

pub use logcount::LogCount;

/// Errors shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("inconsistent input: {0}")]
    Inconsistent(String),
    #[error("unsupported shape: {0}")]
    UnsupportedShape(String),
    #[error("dimension mismatch: {0}")]
    Mismatch(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("degenerate data: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;
