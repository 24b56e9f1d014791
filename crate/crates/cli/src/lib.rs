//! Experiment runner behind the `fblsec` binary: JSON configuration, the
//! `eval`/`solve`/`sweep`/`oracle` commands and CSV output.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{run, Command};
pub use config::ExperimentConfig;
pub use error::CliError;
