//! Command-line experiment runner for `geospread-core`.

pub mod accept;
pub mod config;
pub mod error;
pub mod experiment;
pub mod svg;
pub mod table;

pub use config::{parse_config, ExperimentKind, ExperimentSpec};
pub use error::CliError;
pub use experiment::{run_experiment, Report};
