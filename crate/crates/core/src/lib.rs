//! Video captioning with an attention decoder, hidden-state reconstructors,
//! and cross-entropy plus self-critical policy-gradient training.

pub mod autodiff;
pub mod data;
pub mod error;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod train;

pub use error::{Error, Result};
