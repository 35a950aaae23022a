//! Cross-dataset facial expression recognition benchmark.

pub mod adapters;
pub mod config;
pub mod eval;
pub mod error;
pub mod fsutil;
pub mod ingest;
pub mod labels;
pub mod manifest;
pub mod media;
pub mod metrics;
pub mod normalize;
pub mod pipeline;
pub mod report;
pub mod stats;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
