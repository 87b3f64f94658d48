//! The simulated FaaS platforms: a single-threaded discrete-event loop over
//! integer microseconds, with per-function executor pools, cold starts,
//! keep-alive, network legs, event pipelines, a keyed store and rate-limited
//! logs.
//!
//! Executors serve one request at a time. An arrival reuses the most recently
//! idled executor of its function if that executor has been idle for at most
//! the keep-alive; otherwise a new executor is created and the body starts
//! after a cold-start delay. The logged start of an invocation is its arrival,
//! so a cold start shows up inside the execution duration.

mod cluster;
mod engine;
mod platform;

pub use cluster::{SimAdapter, SimCluster};
pub use engine::{
    Breakdown, CallId, CallOutcome, GroundTruth, InvocationId, InvocationOutcome, RootRequest, SimOutput, Simulation,
    TruthExecutor, TruthInvocation, TruthRoot, Via,
};
pub use platform::{link, PlatformSpec};
