//! Configuration-driven experiment runner for the `stula` sampler: sampling
//! runs, stepsize and temperature sweeps, spectral sweeps, assumption
//! checks, CSV tables and SVG plots.

pub mod config;
pub mod error;
pub mod experiments;
pub mod plot;
pub mod record;
pub mod runner;

pub use config::{ExperimentConfig, Kind, Metric};
pub use error::{CliError, CliResult};
pub use record::ResultRecord;
pub use runner::{run, run_file, RunOutput};
