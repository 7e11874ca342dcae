//! Batch runner for the DA torus scenarios: configuration, scenario
//! pipelines and report emission.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod config;
pub mod report;
pub mod run;

pub use config::{OutputFormat, RunConfig, Scenario};
pub use report::{Check, Report, Series, Timings};
pub use run::{run, run_stages, RunError, RunOutput, Stage};
