//! File formats, configuration and report emission for the `wattn` binary.

pub mod commands;
pub mod config;
mod error;
pub mod io;
pub mod report;

pub use error::{CliError, Result};
