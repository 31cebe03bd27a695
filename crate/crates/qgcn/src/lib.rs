//! File formats, run configuration and the command-line front end for
//! `qgcn-core`.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod report;

pub use config::RunConfig;
pub use error::{CliError, CliResult};
