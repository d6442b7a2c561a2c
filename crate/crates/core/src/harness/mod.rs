//! Configuration, Monte Carlo driver and demo image generation.
//!
//! The receiver is assumed to know the partition plan, including the
//! segment map, and the channel gains.

pub mod config;
pub mod demo;
pub mod experiment;
pub mod seed;
pub mod trial;

pub use config::{ChannelModel, ExperimentConfig};
pub use demo::{reconstruct_demo, DemoManifest};
pub use experiment::{run_experiment, run_workload, write_outputs, ExperimentSummary};
pub use trial::{run_trial, TrialReport, Workload};
