//! Reproducible experiment runs over the whisker tactile pipeline: config,
//! manifests, experiment drivers and chart output.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod manifest;
pub mod plot;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
pub use manifest::RunManifest;
