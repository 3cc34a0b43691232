//! Experiment harness: configuration, run outputs and the subcommands behind the `ornn` binary.

pub mod commands;
pub mod config;
pub mod experiment;
pub mod output;

pub use config::ExperimentConfig;
