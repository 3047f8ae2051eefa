//! Experiment-runner library behind the `cpsim` binary: sweep parsing,
//! parallel trial execution with CSV persistence, trial-log files, and
//! plot-data export.

pub mod export;
pub mod logfile;
pub mod runner;
pub mod sweep;
