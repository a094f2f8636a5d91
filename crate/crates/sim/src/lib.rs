//! Experiment runner for `lsfd-core`: configuration files, drop-level Monte
//! Carlo, outage statistics, result files and the `lsfd` command line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config_file;
pub mod experiment;
pub mod output;
pub mod scenario;
pub mod stats;
pub mod sweep;
pub mod validation;

pub use experiment::{run_scenario, RateReport};
pub use scenario::{LsfdMode, PowerMode, Scenario};
