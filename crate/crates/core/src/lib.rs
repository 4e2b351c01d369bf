//! Cross-silo federated learning simulator with Shapley and Owen attribution.
//!
//! The crate trains a gated highway-network classifier over per-silo data with
//! FedAvg, accounts the bytes each round moves, and explains predictions over
//! grouped categorical features.

pub mod dataset;
pub mod error;
pub mod explain;
pub mod federation;
pub mod metrics;
pub mod nn;
pub mod seed;

pub use error::{Error, Result};
