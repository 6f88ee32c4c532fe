//! Experiment runner behind the `chargelab` binary.

pub mod config;
pub mod plot;
mod run;

pub use config::{resolve, validate, Diagnostic, RawConfig, RunConfig, EXPERIMENTS, KEYS};
pub use run::{run, Outcome, RunError};
