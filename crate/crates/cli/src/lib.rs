//! Benchmark harness behind the `prestige` binary: experiment
//! configuration, seeded repeats, cross-validation for the
//! regularization strength, budget sweeps, CSV emission, and the
//! statistical verification suite for the privacy mechanisms.

pub mod csvfmt;
pub mod experiment;
pub mod verify;

pub use csvfmt::{csv_bytes, emit_csv, format_sig};
pub use experiment::{
    auto_lipschitz, cross_validate_lambda, run_experiment, run_experiment_with_clock,
    DataSource, ExperimentConfig, FixedClock, LambdaChoice, LipschitzChoice, ResultRow,
    TimeSource, WallClock, LAMBDA_GRID,
};
pub use verify::{verify_mechanisms, CheckRow, VerifyConfig, VerifyReport};
