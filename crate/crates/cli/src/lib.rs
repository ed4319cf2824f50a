//! File formats, reports and commands behind the `headmotion` binary.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod io;
pub mod plot;
pub mod report;

pub use error::{CliError, CliResult};
