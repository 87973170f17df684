//! Experiment runner and baselines: minibatch SGD and the single-stage
//! full-sample (DiSCO-style) mode, emitting per-iteration metrics as
//! CSV plus a JSON summary.

pub mod config;
pub mod experiment;
pub mod metrics;
pub mod sgd;

pub use config::{Algorithm, DataSource, ExperimentConfig, SgdParams, StepSchedule};
pub use experiment::{
    load_dataset, run_disco_mode, run_experiment, run_staged_trace, Evaluator, ExperimentOutput,
    ExperimentSummary, LoadedData, StageSummary, OUT_DIR_ENV,
};
pub use metrics::{classification_accuracy, write_csv, MetricsRow, CSV_HEADER};
pub use sgd::{run_sgd_baseline, SgdOutcome};
