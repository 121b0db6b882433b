//! Config-driven runs of the regvi solvers.

pub mod config;
pub mod error;
pub mod expr;
pub mod output;
pub mod run;

pub use config::RunConfig;
pub use error::{CliError, ConfigError};
pub use run::{run_config, run_file, RunOptions, RunSummary, Status};
