//! Experiment harness and configuration plumbing for the `levrec` binary.

pub mod config;
pub mod harness;
pub mod svg;
