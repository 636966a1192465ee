//! Pipeline wiring for the `utikit` command: configuration, the run
//! manifest, and the ingest, trajectory, forge, fuse and eval stages.

pub mod config;
pub mod manifest;
pub mod stages;

pub use config::{BackendKind, ConfigError, PipelineConfig};
pub use stages::{run_pipeline, run_stage, Stage, StageOutcome, StageStatus};
