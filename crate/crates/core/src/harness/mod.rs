//! Experiment orchestration.

pub mod emit;
pub mod run;
pub mod spec;
pub mod validate;
