//! Batch front end for the `lipset` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod svg;

pub use commands::{run, Command};
pub use config::{Preset, Resolved, RunConfig};
pub use error::{CliError, CliResult, EXIT_DATA, EXIT_OK, EXIT_SOLVER, EXIT_USAGE};
