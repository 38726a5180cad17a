//! Experiment harness for the robust MRCPSP solvers: configuration,
//! resumable sweeps, and CSV reports.

pub mod config;
pub mod experiment;
pub mod record;
pub mod report;
