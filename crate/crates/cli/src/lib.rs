//! File formats, experiment configuration and the Monte-Carlo campaign runner
//! behind the `dhankel` binary.

pub mod campaign;
pub mod config;
pub mod error;
pub mod io;
pub mod seed;

pub use campaign::{run_experiment, CampaignResult};
pub use config::ExperimentConfig;
pub use error::CliError;
