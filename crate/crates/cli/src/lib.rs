//! Config-driven front end for the `convex_ldp` estimators.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod run;

pub use commands::{run_dominate, run_estimate, run_rate, run_verify, VerifyOutput, CSV_HEADER, VERSION};
pub use config::{parse_config, Experiment, ExperimentConfig, ShiftMode};
pub use error::{CliError, Result};
