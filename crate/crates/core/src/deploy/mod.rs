//! The deployment compiler: resolves every function to a platform endpoint,
//! synthesizes one publisher function per platform that hosts event-triggered
//! functions, binds external services and emits one self-contained artifact
//! per platform.

mod adapter;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::app::{visit_targets, ApplicationSpec, BodyStep, TriggerKind};
use crate::dist::Dist;
use crate::error::Error;
use crate::sim::PlatformSpec;
use crate::trace::DbOp;

pub use adapter::{
    deploy_all, deploy_as, teardown, AdapterError, Adapters, PlatformAdapter, RunHandle, RunIds, TeardownOutcome,
    TeardownReport,
};

pub const DEFAULT_TRACING_OVERHEAD_BYTES: u64 = 64;

fn default_overhead() -> u64 {
    DEFAULT_TRACING_OVERHEAD_BYTES
}

/// Where an external service lives and how long one operation takes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceBinding {
    pub host: String,
    /// Operation latency (request and reply) for callers without a specific entry.
    pub op_latency: Dist,
    /// Operation latency per caller platform.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub from: BTreeMap<String, Dist>,
}

impl ServiceBinding {
    pub fn latency_from(&self, platform: &str) -> &Dist {
        self.from.get(platform).unwrap_or(&self.op_latency)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeploymentConfig {
    pub platforms: Vec<PlatformSpec>,
    /// Function name to platform id.
    pub assignment: BTreeMap<String, String>,
    #[serde(default)]
    pub services: BTreeMap<String, ServiceBinding>,
    /// Replaces every compute step of the application when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compute_override: Option<Dist>,
    /// Constant tracing token added to every request and response payload.
    #[serde(default = "default_overhead")]
    pub tracing_overhead_bytes: u64,
}

impl DeploymentConfig {
    pub fn from_json(text: &str) -> Result<Self, Error> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("deployment config: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("deployment config serializes")
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn platform(&self, id: &str) -> Option<&PlatformSpec> {
        self.platforms.iter().find(|p| p.id == id)
    }

    pub fn platform_mut(&mut self, id: &str) -> Option<&mut PlatformSpec> {
        self.platforms.iter_mut().find(|p| p.id == id)
    }

    /// Every function of `app` placed on a single platform.
    pub fn single_platform(app: &ApplicationSpec, platform: PlatformSpec, store_latency: Dist) -> Self {
        let id = platform.id.clone();
        DeploymentConfig {
            assignment: app.functions.iter().map(|f| (f.name.clone(), id.clone())).collect(),
            services: app
                .external_services
                .iter()
                .map(|s| {
                    (
                        s.clone(),
                        ServiceBinding { host: id.clone(), op_latency: store_latency.clone(), from: BTreeMap::new() },
                    )
                })
                .collect(),
            platforms: vec![platform],
            compute_override: None,
            tracing_overhead_bytes: DEFAULT_TRACING_OVERHEAD_BYTES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Endpoint {
    pub platform: String,
    pub function: String,
}

impl Endpoint {
    pub fn new(platform: &str, function: &str) -> Self {
        Endpoint { platform: platform.into(), function: function.into() }
    }

    pub fn id(&self) -> String {
        format!("sim://{}/{}", self.platform, self.function)
    }
}

pub fn publisher_name(platform: &str) -> String {
    format!("publisher@{platform}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceEndpoint {
    pub name: String,
    pub host: String,
    /// Operation latency as seen from the artifact's platform.
    pub op_latency: Dist,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResolvedStep {
    Compute {
        time: Dist,
    },
    Call {
        target: Endpoint,
        payload_bytes: u64,
    },
    Publish {
        target: Endpoint,
        publisher: Endpoint,
        payload_bytes: u64,
    },
    Db {
        op: DbOp,
        key: String,
        value_size: u64,
        service: ServiceEndpoint,
    },
    Parallel {
        branches: Vec<Vec<ResolvedStep>>,
    },
    Return {
        size: u64,
    },
    /// Publisher only: hand the incoming event to the platform's event pipeline.
    Forward,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedFunction {
    pub name: String,
    pub trigger: TriggerKind,
    pub entry_point: bool,
    pub body: Vec<ResolvedStep>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub routes: BTreeMap<String, Vec<ResolvedStep>>,
    #[serde(default)]
    pub publisher: bool,
}

impl ResolvedFunction {
    pub fn body_for(&self, route: Option<&str>) -> &[ResolvedStep] {
        route.and_then(|r| self.routes.get(r)).map(Vec::as_slice).unwrap_or(&self.body)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeploymentArtifact {
    pub platform: PlatformSpec,
    pub functions: Vec<ResolvedFunction>,
    pub tracing: bool,
}

impl DeploymentArtifact {
    pub fn platform_id(&self) -> &str {
        &self.platform.id
    }

    pub fn function(&self, name: &str) -> Option<&ResolvedFunction> {
        self.functions.iter().find(|f| f.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeploymentPlan {
    pub application: String,
    pub artifacts: Vec<DeploymentArtifact>,
    pub endpoints: BTreeMap<String, Endpoint>,
    /// Platform id to its publisher endpoint.
    pub publishers: BTreeMap<String, Endpoint>,
    /// All configured platforms, including ones that host nothing.
    pub platforms: Vec<PlatformSpec>,
    pub services: BTreeMap<String, ServiceBinding>,
    pub tracing_overhead_bytes: u64,
}

impl DeploymentPlan {
    pub fn endpoint(&self, function: &str) -> Result<&Endpoint, Error> {
        self.endpoints.get(function).ok_or_else(|| Error::UnknownEndpoint(function.to_string()))
    }

    pub fn platform(&self, id: &str) -> Option<&PlatformSpec> {
        self.platforms.iter().find(|p| p.id == id)
    }

    pub fn artifact(&self, platform: &str) -> Option<&DeploymentArtifact> {
        self.artifacts.iter().find(|a| a.platform.id == platform)
    }
}

fn check_platforms(cfg: &DeploymentConfig) -> Result<(), Error> {
    let mut ids = BTreeSet::new();
    for p in &cfg.platforms {
        if !crate::app::is_valid_function_name(&p.id) {
            return Err(Error::Config(format!("invalid platform id `{}`", p.id)));
        }
        if !ids.insert(p.id.as_str()) {
            return Err(Error::Config(format!("duplicate platform id `{}`", p.id)));
        }
        p.validate()?;
    }
    for p in &cfg.platforms {
        for peer in p.network.keys() {
            if peer != crate::trace::LOADGEN_PLATFORM
                && !ids.contains(peer.as_str())
                && !cfg.services.contains_key(peer)
            {
                return Err(Error::UnknownPlatform(peer.clone()));
            }
        }
    }
    Ok(())
}

fn require_link(cfg: &DeploymentConfig, from: &str, to: &str) -> Result<(), Error> {
    if from == to {
        return Ok(());
    }
    let has = |a: &str, b: &str| cfg.platform(a).is_some_and(|p| p.network.contains_key(b));
    if has(from, to) || has(to, from) {
        Ok(())
    } else {
        Err(Error::Config(format!("no network latency configured between `{from}` and `{to}`")))
    }
}

/// Resolves `app` against `cfg`. Pure: identical inputs give identical plans.
pub fn compile(app: &ApplicationSpec, cfg: &DeploymentConfig) -> Result<DeploymentPlan, Error> {
    let report = app.validate();
    if !report.is_ok() {
        return Err(Error::InvalidApplication(report.violations));
    }
    check_platforms(cfg)?;
    let app = match &cfg.compute_override {
        Some(d) => app.with_compute(d),
        None => app.clone(),
    };

    for f in &app.functions {
        let platform = cfg.assignment.get(&f.name).ok_or_else(|| Error::UnassignedFunction(f.name.clone()))?;
        if cfg.platform(platform).is_none() {
            return Err(Error::UnknownPlatform(platform.clone()));
        }
    }
    if let Some(extra) = cfg.assignment.keys().find(|n| app.function(n).is_none()) {
        return Err(Error::Config(format!("assignment names unknown function `{extra}`")));
    }
    for service in &app.external_services {
        let binding = cfg.services.get(service).ok_or_else(|| Error::MissingServiceBinding(service.clone()))?;
        if cfg.platform(&binding.host).is_none() {
            return Err(Error::UnknownPlatform(binding.host.clone()));
        }
        binding.op_latency.validate()?;
        for (caller, d) in &binding.from {
            if cfg.platform(caller).is_none() {
                return Err(Error::UnknownPlatform(caller.clone()));
            }
            d.validate()?;
        }
    }

    let placed = |name: &str| cfg.assignment[name].as_str();
    for f in &app.functions {
        let here = placed(&f.name);
        if f.entry_point {
            let p = cfg.platform(here).expect("checked");
            if !p.network.contains_key(crate::trace::LOADGEN_PLATFORM) {
                return Err(Error::Config(format!(
                    "platform `{here}` hosts entry point `{}` but has no loadgen latency",
                    f.name
                )));
            }
        }
        for (_, body) in f.bodies() {
            let mut missing = Ok(());
            visit_targets(body, &mut |target, _| {
                if missing.is_ok() {
                    missing = require_link(cfg, here, placed(target));
                }
            });
            missing?;
        }
    }

    let endpoints: BTreeMap<String, Endpoint> =
        app.functions.iter().map(|f| (f.name.clone(), Endpoint::new(placed(&f.name), &f.name))).collect();

    let async_hosts: BTreeSet<&str> =
        app.functions.iter().filter(|f| f.trigger == TriggerKind::EventAsync).map(|f| placed(&f.name)).collect();
    let publishers: BTreeMap<String, Endpoint> =
        async_hosts.iter().map(|p| (p.to_string(), Endpoint::new(p, &publisher_name(p)))).collect();

    let mut artifacts = Vec::new();
    for platform in &cfg.platforms {
        let hosted: Vec<_> = app.functions.iter().filter(|f| placed(&f.name) == platform.id).collect();
        if hosted.is_empty() {
            continue;
        }
        let resolve = |steps: &[BodyStep]| resolve_steps(steps, &platform.id, &endpoints, &publishers, cfg);
        let mut functions = Vec::with_capacity(hosted.len() + 1);
        for f in hosted {
            functions.push(ResolvedFunction {
                name: f.name.clone(),
                trigger: f.trigger,
                entry_point: f.entry_point,
                body: resolve(&f.body)?,
                routes: f.routes.iter().map(|(k, v)| Ok((k.clone(), resolve(v)?))).collect::<Result<_, Error>>()?,
                publisher: false,
            });
        }
        if let Some(endpoint) = publishers.get(&platform.id) {
            functions.push(ResolvedFunction {
                name: endpoint.function.clone(),
                trigger: TriggerKind::HttpSync,
                entry_point: false,
                body: vec![ResolvedStep::Forward, ResolvedStep::Compute { time: platform.publisher_exec.clone() }],
                routes: BTreeMap::new(),
                publisher: true,
            });
        }
        artifacts.push(DeploymentArtifact { platform: platform.clone(), functions, tracing: true });
    }

    Ok(DeploymentPlan {
        application: app.name.clone(),
        artifacts,
        endpoints,
        publishers,
        platforms: cfg.platforms.clone(),
        services: cfg
            .services
            .iter()
            .filter(|(name, _)| app.external_services.contains(name))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect(),
        tracing_overhead_bytes: cfg.tracing_overhead_bytes,
    })
}

fn resolve_steps(
    steps: &[BodyStep],
    here: &str,
    endpoints: &BTreeMap<String, Endpoint>,
    publishers: &BTreeMap<String, Endpoint>,
    cfg: &DeploymentConfig,
) -> Result<Vec<ResolvedStep>, Error> {
    let endpoint = |name: &str| endpoints.get(name).cloned().ok_or_else(|| Error::UnknownEndpoint(name.into()));
    let service = |name: &str| -> Result<ServiceEndpoint, Error> {
        let binding = cfg.services.get(name).ok_or_else(|| Error::MissingServiceBinding(name.into()))?;
        Ok(ServiceEndpoint {
            name: name.into(),
            host: binding.host.clone(),
            op_latency: binding.latency_from(here).clone(),
        })
    };
    steps
        .iter()
        .map(|step| {
            Ok(match step {
                BodyStep::Compute { time } => ResolvedStep::Compute { time: time.clone() },
                BodyStep::Call { target, payload_bytes } => {
                    ResolvedStep::Call { target: endpoint(target)?, payload_bytes: *payload_bytes }
                }
                BodyStep::Publish { target, payload_bytes } => {
                    let target = endpoint(target)?;
                    let publisher = publishers
                        .get(&target.platform)
                        .cloned()
                        .ok_or_else(|| Error::UnknownEndpoint(publisher_name(&target.platform)))?;
                    ResolvedStep::Publish { target, publisher, payload_bytes: *payload_bytes }
                }
                BodyStep::DbGet { key, service: s } => {
                    ResolvedStep::Db { op: DbOp::Get, key: key.clone(), value_size: 0, service: service(s)? }
                }
                BodyStep::DbSet { key, value_size, service: s } => {
                    ResolvedStep::Db { op: DbOp::Set, key: key.clone(), value_size: *value_size, service: service(s)? }
                }
                BodyStep::Parallel { branches } => ResolvedStep::Parallel {
                    branches: branches
                        .iter()
                        .map(|b| resolve_steps(b, here, endpoints, publishers, cfg))
                        .collect::<Result<_, _>>()?,
                },
                BodyStep::Return { size } => ResolvedStep::Return { size: *size },
            })
        })
        .collect()
}
