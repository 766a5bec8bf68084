//! Adaptive heterogeneous gradient quantization for federated learning,
//! with a discrete-event simulator for wall-clock evaluation.

pub mod allocator;
pub mod cli;
pub mod codec;
pub mod config;
pub mod controller;
pub mod data;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod ml;
pub mod rng;
pub mod simnet;
pub mod telemetry;

pub use error::{Error, Result};
