//! Application-centric benchmarking of function-as-a-service deployments on
//! simulated platforms.
//!
//! The pipeline: an [`app::ApplicationSpec`] is compiled against a
//! [`deploy::DeploymentConfig`] into per-platform artifacts, deployed into a
//! [`sim::SimCluster`], driven by a [`loadgen::LoadProfile`], and the
//! resulting trace log is taken apart by [`analyze`].

pub mod analyze;
pub mod app;
pub mod deploy;
pub mod dist;
pub mod error;
pub mod loadgen;
pub mod manager;
pub mod recipes;
pub mod sim;
pub mod time;
pub mod trace;

pub use error::{Error, Result};
