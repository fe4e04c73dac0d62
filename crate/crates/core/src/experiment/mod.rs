//! Config-driven Monte-Carlo experiments.

pub mod config;
pub mod report;
pub mod runner;

pub use config::{ExperimentConfig, Feedback, FeedbackKind};
pub use report::{
    check_bound, policy_accuracy, policy_accuracy_of, queries_to_accuracy, supermartingale_report, BoundReport, MeanCi,
    Summary, SupermartingaleReport,
};
pub use runner::{
    build_pool, prepare_problem, run_experiment, run_trials, settings_from_config, summary_path, write_csv,
    write_outputs, ExperimentResult, ObsKind, Problem, RunSettings, StepRecord, CSV_HEADER,
};
