//! Experiment harness around `lbvh`: synthetic clouds, timed build and query
//! phases, thread-scaling sweeps and an oracle cross-check.

pub mod cli;
pub mod report;
pub mod run;

pub use cli::{Cli, Command};
pub use run::{ExitCode, Failure};
