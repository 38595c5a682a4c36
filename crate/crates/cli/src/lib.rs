//! Config parsing and command dispatch behind the `loopres` binary.

pub mod config;
pub mod run;

pub use config::{parse_config, parse_config_with, Command, ConfigError, RunConfig};
pub use run::{run, Options, Report, RunError};
