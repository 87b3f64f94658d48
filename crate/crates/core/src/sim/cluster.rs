use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use super::engine::{SimOutput, Simulation};
use crate::deploy::{AdapterError, Adapters, DeploymentArtifact, DeploymentPlan, PlatformAdapter};
use crate::error::Error;

#[derive(Debug, Default)]
struct State {
    deployed: BTreeMap<(String, String), DeploymentArtifact>,
    logs: BTreeMap<(String, String), Vec<String>>,
}

/// A set of simulated platforms sharing one virtual world.
///
/// Adapters handed out by [`SimCluster::adapters`] deploy into the cluster; a
/// run is then started over whatever is deployed under its run id.
#[derive(Debug, Clone, Default)]
pub struct SimCluster {
    state: Arc<Mutex<State>>,
}

impl SimCluster {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn adapter(&self, platform: &str) -> SimAdapter {
        SimAdapter { platform: platform.to_string(), state: self.state.clone() }
    }

    pub fn adapters(&self, plan: &DeploymentPlan) -> Adapters {
        plan.artifacts
            .iter()
            .map(|a| {
                let id = a.platform_id().to_string();
                (id.clone(), Box::new(self.adapter(&id)) as Box<dyn PlatformAdapter + Send>)
            })
            .collect()
    }

    /// Builds a simulation over the artifacts deployed for `run_id`.
    pub fn start(&self, run_id: &str, plan: &DeploymentPlan, seed: u64) -> Result<Simulation, Error> {
        let state = self.state.lock().expect("cluster lock");
        let artifacts: Vec<_> = plan
            .artifacts
            .iter()
            .map(|a| {
                state
                    .deployed
                    .get(&(run_id.to_string(), a.platform_id().to_string()))
                    .cloned()
                    .ok_or_else(|| Error::NotDeployed(format!("{} on {}", plan.application, a.platform_id())))
            })
            .collect::<Result<_, _>>()?;
        Simulation::new(
            run_id,
            artifacts,
            plan.platforms.clone(),
            plan.services.clone(),
            plan.tracing_overhead_bytes,
            seed,
        )
    }

    /// Hands each platform its share of a finished run's logs.
    pub fn store_logs(&self, output: &SimOutput) {
        let mut state = self.state.lock().expect("cluster lock");
        for (platform, lines) in &output.platform_logs {
            let key = (output.run_id.clone(), platform.clone());
            if state.deployed.contains_key(&key) {
                state.logs.insert(key, lines.clone());
            }
        }
    }

    /// Number of artifacts and log sets still held, across all runs.
    pub fn residual(&self) -> usize {
        let state = self.state.lock().expect("cluster lock");
        state.deployed.len() + state.logs.len()
    }
}

#[derive(Debug, Clone)]
pub struct SimAdapter {
    platform: String,
    state: Arc<Mutex<State>>,
}

impl PlatformAdapter for SimAdapter {
    fn platform(&self) -> &str {
        &self.platform
    }

    fn deploy(&mut self, run_id: &str, artifact: &DeploymentArtifact) -> Result<(), AdapterError> {
        if artifact.platform_id() != self.platform {
            return Err(AdapterError(format!("artifact for `{}` sent to `{}`", artifact.platform_id(), self.platform)));
        }
        let mut state = self.state.lock().expect("cluster lock");
        state.deployed.insert((run_id.to_string(), self.platform.clone()), artifact.clone());
        Ok(())
    }

    fn collect_logs(&mut self, run_id: &str) -> Result<Vec<String>, AdapterError> {
        let state = self.state.lock().expect("cluster lock");
        Ok(state.logs.get(&(run_id.to_string(), self.platform.clone())).cloned().unwrap_or_default())
    }

    fn remove(&mut self, run_id: &str, _artifact: &DeploymentArtifact) -> Result<(), AdapterError> {
        let mut state = self.state.lock().expect("cluster lock");
        let key = (run_id.to_string(), self.platform.clone());
        state.deployed.remove(&key);
        state.logs.remove(&key);
        Ok(())
    }
}
