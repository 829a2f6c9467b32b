//! Datasets, configuration, persistence and parallel drivers around `fnsyn-core`.

pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod manifest;
pub mod parallel;
pub mod plot;
pub mod table;

pub use error::{CliError, CliResult};
pub use fnsyn_core as core;
