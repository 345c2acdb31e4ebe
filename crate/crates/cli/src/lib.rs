//! Config-driven experiment runner for `sync-mesh-core`.

pub mod config;
pub mod error;
pub mod run;

pub use config::ExperimentConfig;
pub use error::CliError;
pub use run::{analyze_to, simulate, validate, Outcome, Summary};
