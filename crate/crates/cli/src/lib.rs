//! Experiment driver for `geoflow-core`: scenario configs, reports and plots.

pub mod config;
pub mod report;
pub mod scenarios;
pub mod svg;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] geoflow_core::error::GeoError),
}
