//! Experiment driver for the `kinetic` sampling library: flat run
//! configurations, subcommand dispatch and deterministic artifact output.

pub mod commands;
pub mod config;
pub mod output;
pub mod validate;

pub use commands::{run, CommandError, Report};
pub use config::{parse_config, parse_with_overrides, ConfigError, ConfigErrors, RunConfig, Subcommand};
