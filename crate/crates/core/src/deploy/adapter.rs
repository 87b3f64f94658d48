use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{DeploymentArtifact, DeploymentPlan};
use crate::error::Error;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct AdapterError(pub String);

/// The three operations a platform has to offer.
pub trait PlatformAdapter {
    fn platform(&self) -> &str;
    fn deploy(&mut self, run_id: &str, artifact: &DeploymentArtifact) -> Result<(), AdapterError>;
    /// Raw log lines of `run_id`, and only those.
    fn collect_logs(&mut self, run_id: &str) -> Result<Vec<String>, AdapterError>;
    fn remove(&mut self, run_id: &str, artifact: &DeploymentArtifact) -> Result<(), AdapterError>;
}

pub type Adapters = BTreeMap<String, Box<dyn PlatformAdapter + Send>>;

/// Issues run ids of the form `run-<seed>-<n>`.
#[derive(Debug, Clone)]
pub struct RunIds {
    seed: u64,
    next: u32,
    issued: BTreeSet<String>,
}

impl RunIds {
    pub fn new(seed: u64) -> Self {
        RunIds { seed, next: 1, issued: BTreeSet::new() }
    }

    pub fn next_id(&mut self) -> String {
        self.next_id_where(|_| true)
    }

    /// Skips candidates rejected by `free`, e.g. ids whose output directory exists.
    pub fn next_id_where(&mut self, mut free: impl FnMut(&str) -> bool) -> String {
        loop {
            let id = format!("run-{:016x}-{:03}", self.seed, self.next);
            self.next += 1;
            if !self.issued.contains(&id) && free(&id) {
                self.issued.insert(id.clone());
                return id;
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunHandle {
    pub run_id: String,
    deployed: Vec<DeploymentArtifact>,
    torn_down: bool,
}

impl RunHandle {
    pub fn platforms(&self) -> impl Iterator<Item = &str> {
        self.deployed.iter().map(|a| a.platform.id.as_str())
    }

    pub fn is_torn_down(&self) -> bool {
        self.torn_down
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", content = "cause", rename_all = "snake_case")]
pub enum TeardownOutcome {
    Removed,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TeardownReport {
    pub run_id: String,
    pub outcomes: Vec<(String, TeardownOutcome)>,
    /// True when the run had already been torn down.
    pub noop: bool,
}

impl TeardownReport {
    pub fn all_removed(&self) -> bool {
        self.outcomes.iter().all(|(_, o)| *o == TeardownOutcome::Removed)
    }
}

/// Deploys every artifact of `plan` under a fresh run id. On failure the
/// artifacts deployed so far are removed again.
pub fn deploy_all(plan: &DeploymentPlan, adapters: &mut Adapters, ids: &mut RunIds) -> Result<RunHandle, Error> {
    deploy_as(plan, adapters, ids.next_id())
}

/// Like [`deploy_all`] with a run id reserved by the caller.
pub fn deploy_as(plan: &DeploymentPlan, adapters: &mut Adapters, run_id: String) -> Result<RunHandle, Error> {
    if let Some(a) = plan.artifacts.iter().find(|a| !adapters.contains_key(a.platform_id())) {
        return Err(Error::AdapterFailure { platform: a.platform_id().into(), cause: "no adapter registered".into() });
    }
    let mut done: Vec<&DeploymentArtifact> = Vec::new();
    for artifact in &plan.artifacts {
        let adapter = adapters.get_mut(artifact.platform_id()).expect("checked above");
        if let Err(e) = adapter.deploy(&run_id, artifact) {
            for prev in done.iter().rev() {
                let _ = adapters.get_mut(prev.platform_id()).expect("checked").remove(&run_id, prev);
            }
            return Err(Error::AdapterFailure { platform: artifact.platform_id().into(), cause: e.0 });
        }
        done.push(artifact);
    }
    Ok(RunHandle { run_id, deployed: plan.artifacts.clone(), torn_down: false })
}

/// Removes every artifact of the run. Failures are reported, not raised.
pub fn teardown(handle: &mut RunHandle, adapters: &mut Adapters) -> TeardownReport {
    if handle.torn_down {
        return TeardownReport { run_id: handle.run_id.clone(), outcomes: Vec::new(), noop: true };
    }
    let outcomes = handle
        .deployed
        .iter()
        .map(|artifact| {
            let id = artifact.platform_id().to_string();
            let outcome = match adapters.get_mut(&id) {
                None => TeardownOutcome::Failed("no adapter registered".into()),
                Some(adapter) => match adapter.remove(&handle.run_id, artifact) {
                    Ok(()) => TeardownOutcome::Removed,
                    Err(e) => TeardownOutcome::Failed(e.0),
                },
            };
            (id, outcome)
        })
        .collect();
    handle.torn_down = true;
    TeardownReport { run_id: handle.run_id.clone(), outcomes, noop: false }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::app::load_builtin;
    use crate::deploy::{compile, DeploymentConfig, ServiceBinding};
    use crate::dist::Dist;
    use crate::sim::PlatformSpec;
    use std::sync::{Arc, Mutex};

    #[derive(Default)]
    struct Ledger {
        live: BTreeSet<(String, String)>,
    }

    struct Mock {
        id: String,
        ledger: Arc<Mutex<Ledger>>,
        fail_deploy: bool,
        fail_remove: bool,
    }

    impl PlatformAdapter for Mock {
        fn platform(&self) -> &str {
            &self.id
        }
        fn deploy(&mut self, run_id: &str, _: &DeploymentArtifact) -> Result<(), AdapterError> {
            if self.fail_deploy {
                return Err(AdapterError("quota exceeded".into()));
            }
            self.ledger.lock().unwrap().live.insert((run_id.into(), self.id.clone()));
            Ok(())
        }
        fn collect_logs(&mut self, _: &str) -> Result<Vec<String>, AdapterError> {
            Ok(Vec::new())
        }
        fn remove(&mut self, run_id: &str, _: &DeploymentArtifact) -> Result<(), AdapterError> {
            if self.fail_remove {
                return Err(AdapterError("timeout".into()));
            }
            self.ledger.lock().unwrap().live.remove(&(run_id.into(), self.id.clone()));
            Ok(())
        }
    }

    fn plan_on(platforms: &[&str]) -> DeploymentPlan {
        let app = load_builtin("streaming").unwrap();
        let specs: Vec<_> =
            platforms.iter().map(|p| PlatformSpec::new(p).with_link("loadgen", Dist::Constant(5.0))).collect();
        let cfg = DeploymentConfig {
            assignment: app
                .functions
                .iter()
                .enumerate()
                .map(|(i, f)| (f.name.clone(), platforms[i % platforms.len()].to_string()))
                .collect(),
            services: BTreeMap::from([(
                "store".into(),
                ServiceBinding { host: platforms[0].into(), op_latency: Dist::Constant(3.0), from: BTreeMap::new() },
            )]),
            platforms: specs,
            compute_override: None,
            tracing_overhead_bytes: 64,
        };
        compile(&app, &cfg).unwrap()
    }

    fn adapters(ledger: &Arc<Mutex<Ledger>>, ids: &[&str], fail_deploy: &str, fail_remove: &str) -> Adapters {
        ids.iter()
            .map(|id| {
                let mock = Mock {
                    id: id.to_string(),
                    ledger: ledger.clone(),
                    fail_deploy: *id == fail_deploy,
                    fail_remove: *id == fail_remove,
                };
                (id.to_string(), Box::new(mock) as Box<dyn PlatformAdapter + Send>)
            })
            .collect()
    }

    #[test]
    fn healthy_deploy_and_teardown() {
        let ledger = Arc::new(Mutex::new(Ledger::default()));
        let plan = plan_on(&["a"]);
        let mut ad = adapters(&ledger, &["a"], "", "");
        let mut ids = RunIds::new(7);
        let mut handle = deploy_all(&plan, &mut ad, &mut ids).unwrap();
        let second = deploy_all(&plan, &mut ad, &mut ids).unwrap();
        assert_ne!(handle.run_id, second.run_id);
        let report = teardown(&mut handle, &mut ad);
        assert!(report.all_removed() && !report.noop);
        let again = teardown(&mut handle, &mut ad);
        assert!(again.noop && again.outcomes.is_empty());
    }

    #[test]
    fn failed_deploy_rolls_back() {
        let ledger = Arc::new(Mutex::new(Ledger::default()));
        let plan = plan_on(&["a", "b"]);
        let mut ad = adapters(&ledger, &["a", "b"], "b", "");
        let err = deploy_all(&plan, &mut ad, &mut RunIds::new(1)).unwrap_err();
        assert!(matches!(err, Error::AdapterFailure { ref platform, .. } if platform == "b"));
        assert!(ledger.lock().unwrap().live.is_empty());
    }

    #[test]
    fn failed_remove_is_reported() {
        let ledger = Arc::new(Mutex::new(Ledger::default()));
        let plan = plan_on(&["a", "b"]);
        let mut ad = adapters(&ledger, &["a", "b"], "", "a");
        let mut handle = deploy_all(&plan, &mut ad, &mut RunIds::new(1)).unwrap();
        let report = teardown(&mut handle, &mut ad);
        assert_eq!(report.outcomes[0], ("a".to_string(), TeardownOutcome::Failed("timeout".into())));
        assert_eq!(report.outcomes[1], ("b".to_string(), TeardownOutcome::Removed));
    }

    #[test]
    fn missing_adapter_deploys_nothing() {
        let ledger = Arc::new(Mutex::new(Ledger::default()));
        let plan = plan_on(&["a", "b"]);
        let mut ad = adapters(&ledger, &["a"], "", "");
        assert!(deploy_all(&plan, &mut ad, &mut RunIds::new(1)).is_err());
        assert!(ledger.lock().unwrap().live.is_empty());
    }

    #[test]
    fn run_ids_skip_taken() {
        let mut ids = RunIds::new(255);
        let first = ids.next_id_where(|id| !id.ends_with("-001"));
        assert_eq!(first, "run-00000000000000ff-002");
    }
}
