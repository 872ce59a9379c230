//! Toy-scale transformer and the experiments that probe which output
//! sequences it can be prompted to produce.

pub mod experiments;
pub mod support;
pub mod toymodel;

pub use accessbound_core::{Error, Result};
pub use toymodel::{Input, ToyConfig, ToyTransformer};
