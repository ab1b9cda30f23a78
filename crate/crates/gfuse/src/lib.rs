//! Files, caches and the command line around `gfuse-core`.

pub mod cache;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod histogram;
pub mod metrics;
pub mod model_file;

pub use crate::error::{Error, Result};
