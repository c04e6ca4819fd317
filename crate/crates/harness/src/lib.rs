//! Experiment harness for the mean-field gradient flow: configuration, data generators,
//! experiment drivers and output writers behind the `meanflow` command.

pub mod config;
pub mod experiments;
pub mod generators;
pub mod output;
pub mod rng;

pub use config::ExperimentConfig;
pub use experiments::{run_experiment, ExperimentReport};
