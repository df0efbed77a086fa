//! Command-line front end of the thin-film heteroclinic toolkit: run
//! configurations, artifact writers and the subcommand runners.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::CommandError;
pub use config::{ConfigError, RunConfig, SCHEMA};
pub use output::{Meta, VERSION};
