//! Experiment orchestration and the command-line entry point.
//!
//! [`cmd_run`] drives a full experiment from a [`RunConfig`]: ingest (or
//! synthesize) the panel, cluster textual features into social factors,
//! tune and train one probabilistic boosted model per (region, horizon,
//! family, hour), score against the naive baselines, run the causal
//! analyses, attribute the richest family's predictions, and leave behind
//! CSV tables, SVG plots, saved models, and a manifest that pins down
//! every seed, hyperparameter choice, and artifact hash. [`cmd_forecast`]
//! and [`cmd_attribute`] replay a finished run's models; [`cmd_synth`],
//! [`cmd_cluster`], and [`cmd_causality`] expose single phases.
//!
//! Determinism contract: with a fixed config and seed, every artifact
//! except `timings.json` is byte-identical across runs, regardless of the
//! worker-thread count. All stochastic tasks derive their own seed from
//! the global one, and each output file has exactly one writer.

mod auxcmd;
mod cli;
mod config;
mod forecast;
mod pipeline;
mod plots;

use thiserror::Error;

pub use auxcmd::{cmd_causality, cmd_cluster, cmd_synth};
pub use cli::cli_main;
pub use config::{
    load_config, CausalitySection, DataSection, FeatureSection, RunConfig, SynthSection,
    TuningSection, FAMILIES,
};
pub use forecast::{cmd_attribute, cmd_forecast, ForecastRow, Z_90};
pub use pipeline::{cmd_run, ClusterSummary, RunManifest};

/// Command-layer failures, partitioned by exit code: configuration
/// problems exit 2, input and artifact problems exit 3, internal task
/// failures exit 4.
#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("config: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(String),
    #[error("model not found: {0}")]
    ModelNotFound(String),
    #[error("date out of range: {0}")]
    DateOutOfRange(String),
    #[error("task {task}: {msg}")]
    Internal { task: String, msg: String },
}

impl RunnerError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunnerError::Config(_) => 2,
            RunnerError::Data(_) | RunnerError::ModelNotFound(_) | RunnerError::DateOutOfRange(_) => 3,
            RunnerError::Internal { .. } => 4,
        }
    }
}
