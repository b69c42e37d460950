//! Star-based location cloaking for travelers on road networks.
//!
//! The crate covers the road-network substrate, query intake, the cost model,
//! the cloaking engine and its variants, two baseline cloakers, an inference
//! attack suite, and a discrete-event simulation harness.

pub mod error;
pub mod ids;
pub mod network;

pub use error::{Error, Result};
pub mod cost;
pub mod engine;
pub mod query;
pub mod baseline;
pub mod algorithm;
pub mod attack;
pub mod config;
pub mod sim;
pub mod bundle;
pub mod report;
