//! Experiment orchestration: schedules t_N, regularization runs, t-sweeps
//! and their on-disk reports.

mod config;
mod experiment;
mod report;
mod schedule;

pub use config::ExperimentConfig;
pub use experiment::{run_regularization, sweep_t, Cell, ExperimentReport, NSummary, SweepRow, SweepTable};
pub use report::{emit_report, emit_sweep, load_report};
pub use schedule::{schedule_t, Schedule};
