//! Benchmark applications: graphs of functions with scripted bodies.
//!
//! A function body is a list of steps executed in order by one executor.
//! Synchronous calls block the caller until the callee's response arrives,
//! publishes hand an event to the destination platform's publisher function
//! and return immediately, and parallel blocks run their branches
//! concurrently and join on the slowest.

mod builtin;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dist::Dist;
use crate::error::Error;
use crate::trace::{CallMode, LOADGEN_PLATFORM};

pub use builtin::{builtin_names, load_builtin};

pub const DEFAULT_STORE: &str = "store";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TriggerKind {
    #[serde(rename = "http-sync")]
    HttpSync,
    #[serde(rename = "event-async")]
    EventAsync,
}

fn default_store() -> String {
    DEFAULT_STORE.to_string()
}

fn is_zero(v: &u64) -> bool {
    *v == 0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BodyStep {
    Compute {
        time: Dist,
    },
    Call {
        target: String,
        #[serde(default, skip_serializing_if = "is_zero")]
        payload_bytes: u64,
    },
    Publish {
        target: String,
        #[serde(default, skip_serializing_if = "is_zero")]
        payload_bytes: u64,
    },
    DbGet {
        key: String,
        #[serde(default = "default_store")]
        service: String,
    },
    DbSet {
        key: String,
        value_size: u64,
        #[serde(default = "default_store")]
        service: String,
    },
    Parallel {
        branches: Vec<Vec<BodyStep>>,
    },
    Return {
        #[serde(default)]
        size: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionSpec {
    pub name: String,
    pub trigger: TriggerKind,
    #[serde(default)]
    pub entry_point: bool,
    pub body: Vec<BodyStep>,
    /// Alternative bodies selected by the request's route. Requests without a
    /// route, or with an unknown one, run `body`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub routes: BTreeMap<String, Vec<BodyStep>>,
}

impl FunctionSpec {
    pub fn body_for(&self, route: Option<&str>) -> &[BodyStep] {
        route.and_then(|r| self.routes.get(r)).map(Vec::as_slice).unwrap_or(&self.body)
    }

    /// The default body followed by every route body, in route-name order.
    pub fn bodies(&self) -> impl Iterator<Item = (Option<&str>, &[BodyStep])> {
        std::iter::once((None, self.body.as_slice()))
            .chain(self.routes.iter().map(|(k, v)| (Some(k.as_str()), v.as_slice())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApplicationSpec {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub functions: Vec<FunctionSpec>,
    #[serde(default)]
    pub external_services: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Violation {
    InvalidName(String),
    DuplicateName(String),
    UnknownTarget {
        function: String,
        target: String,
    },
    /// A call step targets an event-async function or a publish step an http-sync one.
    TriggerMismatch {
        function: String,
        target: String,
    },
    UnknownService {
        function: String,
        service: String,
    },
    NoEntryPoint,
    EventEntryPoint(String),
    Unreachable(String),
    ParallelTooFewBranches(String),
    ReturnNotLast(String),
    InvalidDistribution {
        function: String,
        reason: String,
    },
    UnknownRoute {
        function: String,
        route: String,
    },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::InvalidName(n) => write!(f, "invalid function name `{n}`"),
            Violation::DuplicateName(n) => write!(f, "duplicate function name `{n}`"),
            Violation::UnknownTarget { function, target } => write!(f, "{function}: unknown target `{target}`"),
            Violation::TriggerMismatch { function, target } => {
                write!(f, "{function}: step kind does not match trigger of `{target}`")
            }
            Violation::UnknownService { function, service } => write!(f, "{function}: unknown service `{service}`"),
            Violation::NoEntryPoint => write!(f, "application has no entry point"),
            Violation::EventEntryPoint(n) => write!(f, "entry point `{n}` must be http-sync"),
            Violation::Unreachable(n) => write!(f, "`{n}` is unreachable from any entry point"),
            Violation::ParallelTooFewBranches(n) => write!(f, "{n}: parallel block needs at least two branches"),
            Violation::ReturnNotLast(n) => write!(f, "{n}: return must be the final step"),
            Violation::InvalidDistribution { function, reason } => write!(f, "{function}: {reason}"),
            Violation::UnknownRoute { function, route } => write!(f, "{function}: unknown route `{route}`"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Characters reserved for synthesized names and the log format.
pub fn is_valid_function_name(name: &str) -> bool {
    !name.is_empty()
        && name != LOADGEN_PLATFORM
        && !name.starts_with('#')
        && !name.chars().any(|c| c.is_whitespace() || c == '@' || c.is_control())
}

impl ApplicationSpec {
    pub fn from_json(text: &str) -> Result<Self, Error> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("application spec: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("application spec serializes")
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn function(&self, name: &str) -> Option<&FunctionSpec> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn entry_points(&self) -> impl Iterator<Item = &FunctionSpec> {
        self.functions.iter().filter(|f| f.entry_point)
    }

    pub fn has_async_functions(&self) -> bool {
        self.functions.iter().any(|f| f.trigger == TriggerKind::EventAsync)
    }

    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        let mut seen = BTreeSet::new();
        for f in &self.functions {
            if !is_valid_function_name(&f.name) {
                violations.push(Violation::InvalidName(f.name.clone()));
            }
            if !seen.insert(f.name.as_str()) {
                violations.push(Violation::DuplicateName(f.name.clone()));
            }
        }
        let triggers: BTreeMap<&str, TriggerKind> =
            self.functions.iter().map(|f| (f.name.as_str(), f.trigger)).collect();

        for f in &self.functions {
            for (_, body) in f.bodies() {
                self.check_steps(f, body, &triggers, &mut violations);
            }
            if f.entry_point && f.trigger == TriggerKind::EventAsync {
                violations.push(Violation::EventEntryPoint(f.name.clone()));
            }
        }

        if self.entry_points().next().is_none() {
            violations.push(Violation::NoEntryPoint);
        } else {
            let reachable = self.reachable_from_entries();
            for f in &self.functions {
                if !reachable.contains(f.name.as_str()) {
                    violations.push(Violation::Unreachable(f.name.clone()));
                }
            }
        }
        violations.dedup();
        ValidationReport { violations }
    }

    fn check_steps(
        &self,
        f: &FunctionSpec,
        steps: &[BodyStep],
        triggers: &BTreeMap<&str, TriggerKind>,
        out: &mut Vec<Violation>,
    ) {
        for (i, step) in steps.iter().enumerate() {
            match step {
                BodyStep::Compute { time } => {
                    if let Err(e) = time.validate() {
                        out.push(Violation::InvalidDistribution { function: f.name.clone(), reason: e.to_string() });
                    }
                }
                BodyStep::Call { target, .. } | BodyStep::Publish { target, .. } => {
                    let wanted = match step {
                        BodyStep::Call { .. } => TriggerKind::HttpSync,
                        _ => TriggerKind::EventAsync,
                    };
                    match triggers.get(target.as_str()) {
                        None => out.push(Violation::UnknownTarget { function: f.name.clone(), target: target.clone() }),
                        Some(kind) if *kind != wanted => {
                            out.push(Violation::TriggerMismatch { function: f.name.clone(), target: target.clone() })
                        }
                        Some(_) => {}
                    }
                }
                BodyStep::DbGet { service, .. } | BodyStep::DbSet { service, .. } => {
                    if !self.external_services.contains(service) {
                        out.push(Violation::UnknownService { function: f.name.clone(), service: service.clone() });
                    }
                }
                BodyStep::Parallel { branches } => {
                    if branches.len() < 2 {
                        out.push(Violation::ParallelTooFewBranches(f.name.clone()));
                    }
                    for branch in branches {
                        if branch.iter().any(|s| matches!(s, BodyStep::Return { .. })) {
                            out.push(Violation::ReturnNotLast(f.name.clone()));
                        }
                        self.check_steps(f, branch, triggers, out);
                    }
                }
                BodyStep::Return { .. } => {
                    if i + 1 != steps.len() {
                        out.push(Violation::ReturnNotLast(f.name.clone()));
                    }
                }
            }
        }
    }

    fn reachable_from_entries(&self) -> BTreeSet<&str> {
        let mut edges: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for f in &self.functions {
            for (_, body) in f.bodies() {
                visit_targets(body, &mut |t, _| edges.entry(f.name.as_str()).or_default().push(t));
            }
        }
        let mut seen: BTreeSet<&str> = self.entry_points().map(|f| f.name.as_str()).collect();
        let mut queue: VecDeque<&str> = seen.iter().copied().collect();
        while let Some(n) = queue.pop_front() {
            for &next in edges.get(n).into_iter().flatten() {
                if seen.insert(next) {
                    queue.push_back(next);
                }
            }
        }
        seen
    }

    /// Replaces every compute step's distribution.
    pub fn with_compute(&self, dist: &Dist) -> Self {
        fn rewrite(steps: &mut [BodyStep], dist: &Dist) {
            for step in steps {
                match step {
                    BodyStep::Compute { time } => *time = dist.clone(),
                    BodyStep::Parallel { branches } => branches.iter_mut().for_each(|b| rewrite(b, dist)),
                    _ => {}
                }
            }
        }
        let mut out = self.clone();
        for f in &mut out.functions {
            rewrite(&mut f.body, dist);
            for body in f.routes.values_mut() {
                rewrite(body, dist);
            }
        }
        out
    }

    pub fn call_graph(&self) -> Result<CallGraph, Error> {
        let report = self.validate();
        if !report.is_ok() {
            return Err(Error::InvalidApplication(report.violations));
        }
        let mut edges = Vec::new();
        for f in &self.functions {
            for (_, body) in f.bodies() {
                visit_targets(body, &mut |target, mode| {
                    edges.push(CallEdge { caller: f.name.clone(), callee: target.to_string(), mode })
                });
            }
        }
        Ok(CallGraph { nodes: self.functions.iter().map(|f| f.name.clone()).collect(), edges })
    }
}

/// Depth-first walk over call and publish targets.
pub(crate) fn visit_targets<'a>(steps: &'a [BodyStep], f: &mut impl FnMut(&'a str, CallMode)) {
    for step in steps {
        match step {
            BodyStep::Call { target, .. } => f(target, CallMode::Sync),
            BodyStep::Publish { target, .. } => f(target, CallMode::Async),
            BodyStep::Parallel { branches } => branches.iter().for_each(|b| visit_targets(b, f)),
            _ => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CallEdge {
    pub caller: String,
    pub callee: String,
    pub mode: CallMode,
}

/// Directed multigraph: one edge per call or publish step occurrence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CallGraph {
    pub nodes: Vec<String>,
    pub edges: Vec<CallEdge>,
}

impl CallGraph {
    pub fn has_edge(&self, caller: &str, callee: &str, mode: CallMode) -> bool {
        self.edges.iter().any(|e| e.caller == caller && e.callee == callee && e.mode == mode)
    }

    pub fn reachable_from(&self, start: &str) -> BTreeSet<String> {
        let mut seen = BTreeSet::from([start.to_string()]);
        let mut queue = VecDeque::from([start.to_string()]);
        while let Some(n) = queue.pop_front() {
            for e in self.edges.iter().filter(|e| e.caller == n) {
                if seen.insert(e.callee.clone()) {
                    queue.push_back(e.callee.clone());
                }
            }
        }
        seen
    }
}
