//! Pipeline runner: ingest, simulate, metrics, features, select, irf and
//! report stages driven by one JSON run configuration.

pub mod config;
pub mod demo;
pub mod pipeline;
pub mod tables;

pub use config::{ConfigError, Members, RunConfig, Seeds};
pub use pipeline::{run_pipeline, Pipeline, ReportBundle, RunError, Stage, StageStatus};
