//! Library side of the `shellxy` command: configuration, artifacts and experiment pipelines.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifacts;
pub mod config;
pub mod pipelines;

pub use config::ExperimentConfig;
pub use pipelines::RunOptions;
