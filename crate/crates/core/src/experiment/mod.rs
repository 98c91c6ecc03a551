//! Experiment runner: configuration, the per-seed pipeline, multi-seed
//! aggregation, ablation sweeps and on-disk run artifacts.

pub mod config;
pub mod pipeline;
pub mod report;
pub mod run;
pub mod sweep;

pub use config::{ConfigError, DatasetSource, ExperimentConfig, MetricSettings, ModelSettings, SamplingKind};
pub use pipeline::{evaluate, train, Evaluation, EvaluationScope, PipelineError, Prepared, TrainedModel};
pub use run::{manifest_hash, report, Artifact, RunError, Runner};
pub use sweep::{run_sweep, Sweep, SweepParam};
