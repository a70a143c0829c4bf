//! Scenario configuration, experiment orchestration and report output for
//! the `sensorsched` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod montecarlo;
pub mod pipeline;
pub mod svg;

pub use commands::{load_config, Overrides};
pub use config::{ConfigError, ScenarioConfig};
pub use error::{CliError, Outcome};
pub use pipeline::Experiment;
