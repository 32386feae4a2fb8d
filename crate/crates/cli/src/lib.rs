//! Command-line front end: config resolution and command execution.

pub mod config;
pub mod run;

pub use config::{parse_config, CliError, Cli, Command, RunConfig};
pub use run::run;
