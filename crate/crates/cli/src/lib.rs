//! Command-line harness: sample ingestion, mechanism design and the
//! finite-sample experiments, with CSV results and JSON sidecars.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;

pub use error::{CliError, CliResult};
