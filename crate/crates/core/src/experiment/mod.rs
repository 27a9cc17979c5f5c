//! Configuration, evaluation protocol and parameter sweeps.

mod config;
mod runner;

pub use config::{ExperimentConfig, Scenario};
pub use runner::{
    curves_to_csv, learning_curves, paired_difference, rows_to_csv, sweep_capacity, sweep_lifetime,
    sweep_memory, Context, EvalResult, Row, Scheme, PILOT_MULTIPLIERS,
};
