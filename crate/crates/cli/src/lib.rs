//! Experiment-file front end for the [`heisenet`] register simulator:
//! a line-oriented DSL, its elaboration into stage chains, and the
//! rendering and exit-code contract of the `heisenet` binary.

pub mod dsl;
pub mod elaborate;
pub mod report;
pub mod runner;
