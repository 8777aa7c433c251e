//! Experiment plumbing: configuration, sweeps, artifacts and validation.

pub mod analyze;
pub mod artifact;
pub mod config;
pub mod run;
pub mod validate;

pub use analyze::{analyze, AnalysisReport};
pub use artifact::{OutputFormat, PointResult, ResultArtifact};
pub use config::{ExperimentConfig, SchemeKind, SweepParam};
pub use run::{prepare_point, run, run_point, PreparedPoint, RunOptions};
pub use validate::{validate, ValidateOptions, ValidationReport};
