//! Experiment runner: JSON configs in, versioned CSV tables and run manifests
//! out, plus the standard presets.

pub mod config;
pub mod error;
pub mod output;
pub mod presets;
pub mod qmap;
pub mod runner;

pub use config::{load_config, parse_config, ExperimentConfig};
pub use error::{CliError, CliResult};
pub use runner::{run_experiment, run_to_dir};
