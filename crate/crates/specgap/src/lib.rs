//! Command-line front end for `specgap-core`: JSON operator configs,
//! analysis commands and their CSV/JSON outputs.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use error::CliError;
