//! Batch front end for the `budgetmech` library: TOML experiment configs in,
//! CSV summaries and JSON detail files out.

pub mod config;
pub mod run;

pub use config::{parse_config, Action, ConfigError, ExperimentConfig, MECHANISMS};
pub use run::{
    execute, run_experiment, write_results, Report, ResultRow, EXIT_AUDIT_FAILED, EXIT_ERROR,
    EXIT_OK,
};
