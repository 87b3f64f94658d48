//! Open-loop load generation: phased profiles of workflows.
//!
//! A workflow instance gets one context id; its steps are sent at fixed
//! offsets (the cumulative think times) from the instance's arrival, so no
//! send time ever depends on a response.

pub(crate) mod builtin;

use std::collections::BTreeMap;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp;
use serde::{Deserialize, Serialize};

use crate::app::ApplicationSpec;
use crate::error::Error;
use crate::sim::{RootRequest, Simulation};
use crate::time::{secs, Micros};
use crate::trace::{ContextId, PHASE_TAG};

pub use builtin::builtin_profile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkflowStep {
    pub entry: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub route: Option<String>,
    #[serde(default)]
    pub payload_bytes: u64,
    /// Pause before the next step is sent.
    #[serde(default)]
    pub think_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Workflow {
    pub name: String,
    pub steps: Vec<WorkflowStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weighted {
    pub workflow: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stream {
    pub workflow: String,
    pub interval_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Phase {
    /// Poisson arrivals at `rate` workflows per second.
    ConstantRate {
        name: String,
        rate: f64,
        duration_s: f64,
        mix: Vec<Weighted>,
    },
    /// Each stream fires at k * interval for k = 1, 2, ... up to the phase end.
    Periodic {
        name: String,
        duration_s: f64,
        streams: Vec<Stream>,
    },
    Pause {
        name: String,
        duration_s: f64,
    },
    /// `total` arrivals spread evenly over the phase.
    Burst {
        name: String,
        total: u64,
        duration_s: f64,
        mix: Vec<Weighted>,
    },
}

impl Phase {
    pub fn name(&self) -> &str {
        match self {
            Phase::ConstantRate { name, .. }
            | Phase::Periodic { name, .. }
            | Phase::Pause { name, .. }
            | Phase::Burst { name, .. } => name,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Phase::ConstantRate { .. } => "constant_rate",
            Phase::Periodic { .. } => "periodic",
            Phase::Pause { .. } => "pause",
            Phase::Burst { .. } => "burst",
        }
    }

    pub fn duration_s(&self) -> f64 {
        match self {
            Phase::ConstantRate { duration_s, .. }
            | Phase::Periodic { duration_s, .. }
            | Phase::Pause { duration_s, .. }
            | Phase::Burst { duration_s, .. } => *duration_s,
        }
    }
}

/// How the scale factor is applied.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleMode {
    /// Shrink every phase duration and burst total; rates and intervals stay.
    #[default]
    Durations,
    /// Keep durations; multiply rates and burst totals, divide intervals.
    Rates,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadProfile {
    pub workflows: Vec<Workflow>,
    pub phases: Vec<Phase>,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default)]
    pub scale_mode: ScaleMode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseWindow {
    pub name: String,
    pub kind: String,
    pub start: Micros,
    pub end: Micros,
}

impl PhaseWindow {
    pub fn to_line(&self, run_id: &str) -> String {
        format!("{PHASE_TAG}\t{run_id}\t{}\t{}\t{}\t{}", self.name, self.kind, self.start, self.end)
    }

    pub fn parse_line(line: &str) -> Option<(String, PhaseWindow)> {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 6 || f[0] != PHASE_TAG {
            return None;
        }
        Some((
            f[1].to_string(),
            PhaseWindow { name: f[2].into(), kind: f[3].into(), start: f[4].parse().ok()?, end: f[5].parse().ok()? },
        ))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Arrival {
    pub at: Micros,
    pub workflow: String,
    pub phase: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Launched {
    pub context: ContextId,
    pub workflow: String,
    pub at: Micros,
    pub requests: usize,
}

impl LoadProfile {
    pub fn from_json(text: &str) -> Result<Self, Error> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("load profile: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("profile serializes")
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn workflow(&self, name: &str) -> Option<&Workflow> {
        self.workflows.iter().find(|w| w.name == name)
    }

    /// Checks the profile on its own and, if given, against the application.
    pub fn validate(&self, app: Option<&ApplicationSpec>) -> Result<(), Error> {
        let bad = |msg: String| Err(Error::Config(format!("load profile: {msg}")));
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return bad(format!("scale must be positive, got {}", self.scale));
        }
        if self.phases.iter().map(Phase::duration_s).sum::<f64>() <= 0.0 {
            return bad("total duration must be positive".into());
        }
        let known = |w: &str| self.workflow(w).is_some();
        for phase in &self.phases {
            let d = phase.duration_s();
            if !(d >= 0.0 && d.is_finite()) {
                return bad(format!("phase `{}` has invalid duration {d}", phase.name()));
            }
            let mix = match phase {
                Phase::ConstantRate { rate, mix, .. } => {
                    if !(*rate >= 0.0 && rate.is_finite()) {
                        return bad(format!("phase `{}` has invalid rate {rate}", phase.name()));
                    }
                    Some(mix)
                }
                Phase::Burst { total, mix, .. } => {
                    if *total < 1 {
                        return bad(format!("burst `{}` needs at least one flow", phase.name()));
                    }
                    Some(mix)
                }
                Phase::Periodic { streams, .. } => {
                    for s in streams {
                        if !(s.interval_s > 0.0 && s.interval_s.is_finite()) {
                            return bad(format!("stream `{}` needs a positive interval", s.workflow));
                        }
                        if !known(&s.workflow) {
                            return bad(format!("unknown workflow `{}`", s.workflow));
                        }
                    }
                    None
                }
                Phase::Pause { .. } => None,
            };
            if let Some(mix) = mix {
                let sum: f64 = mix.iter().map(|w| w.weight).sum();
                if mix.is_empty() || (sum - 1.0).abs() > 1e-9 || mix.iter().any(|w| w.weight.is_nan() || w.weight < 0.0)
                {
                    return bad(format!("weights of phase `{}` must be nonnegative and sum to 1", phase.name()));
                }
                if let Some(w) = mix.iter().find(|w| !known(&w.workflow)) {
                    return bad(format!("unknown workflow `{}`", w.workflow));
                }
            }
        }
        for w in &self.workflows {
            if w.steps.is_empty() {
                return bad(format!("workflow `{}` has no steps", w.name));
            }
            for step in &w.steps {
                if !(step.think_ms >= 0.0 && step.think_ms.is_finite()) {
                    return bad(format!("workflow `{}` has an invalid think time", w.name));
                }
                if let Some(app) = app {
                    match app.function(&step.entry) {
                        Some(f) if f.entry_point => {
                            if let Some(route) = &step.route {
                                if !f.routes.contains_key(route) {
                                    return bad(format!("`{}` has no route `{route}`", f.name));
                                }
                            }
                        }
                        _ => return bad(format!("workflow `{}` targets non-entry `{}`", w.name, step.entry)),
                    }
                }
            }
        }
        Ok(())
    }

    fn scaled_duration(&self, phase: &Phase) -> Micros {
        match self.scale_mode {
            ScaleMode::Durations => secs(phase.duration_s() * self.scale),
            ScaleMode::Rates => secs(phase.duration_s()),
        }
    }

    /// Phase boundaries after scaling.
    pub fn windows(&self) -> Vec<PhaseWindow> {
        let mut t = 0;
        self.phases
            .iter()
            .map(|p| {
                let start = t;
                t += self.scaled_duration(p);
                PhaseWindow { name: p.name().to_string(), kind: p.kind().to_string(), start, end: t }
            })
            .collect()
    }

    pub fn total_duration(&self) -> Micros {
        self.windows().last().map_or(0, |w| w.end)
    }
}

fn pick(mix: &[Weighted], rng: &mut ChaCha8Rng) -> String {
    let index = WeightedIndex::new(mix.iter().map(|w| w.weight)).expect("validated weights");
    mix[index.sample(rng)].workflow.clone()
}

/// Synthesizes the arrival times of workflow instances, sorted by time.
pub fn schedule(profile: &LoadProfile, seed: u64) -> Vec<Arrival> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(11);
    let s = profile.scale;
    let rates = profile.scale_mode == ScaleMode::Rates;
    let mut out = Vec::new();
    for (i, (phase, window)) in profile.phases.iter().zip(profile.windows()).enumerate() {
        let (start, end) = (window.start, window.end);
        match phase {
            Phase::ConstantRate { rate, mix, .. } => {
                let rate = if rates { rate * s } else { *rate };
                if rate <= 0.0 {
                    continue;
                }
                let gap = Exp::new(rate).expect("positive rate");
                let mut t = start as f64;
                loop {
                    t += gap.sample(&mut rng) * 1e6;
                    let at = t.round() as Micros;
                    if at >= end {
                        break;
                    }
                    out.push(Arrival { at, workflow: pick(mix, &mut rng), phase: i });
                }
            }
            Phase::Periodic { streams, .. } => {
                for stream in streams {
                    let interval = if rates { stream.interval_s / s } else { stream.interval_s };
                    let mut k = 1u64;
                    loop {
                        let at = start + secs(interval * k as f64);
                        if at > end {
                            break;
                        }
                        out.push(Arrival { at, workflow: stream.workflow.clone(), phase: i });
                        k += 1;
                    }
                }
            }
            Phase::Pause { .. } => {}
            Phase::Burst { total, mix, .. } => {
                let n = (*total as f64 * s).round() as u64;
                let span = (end - start) as f64;
                for k in 0..n {
                    let at = start + (k as f64 * span / n as f64).round() as Micros;
                    out.push(Arrival { at, workflow: pick(mix, &mut rng), phase: i });
                }
            }
        }
    }
    out.sort_by_key(|a| a.at);
    out
}

/// Issues every scheduled workflow into the simulation. Each instance gets
/// a fresh context id; each step is one root request.
pub fn execute(arrivals: &[Arrival], profile: &LoadProfile, sim: &mut Simulation) -> Result<Vec<Launched>, Error> {
    let mut launched = Vec::with_capacity(arrivals.len());
    for arrival in arrivals {
        let workflow = profile
            .workflow(&arrival.workflow)
            .ok_or_else(|| Error::Config(format!("unknown workflow `{}`", arrival.workflow)))?;
        let context = sim.ids().new_context();
        let mut at = arrival.at;
        for step in &workflow.steps {
            sim.submit_root(RootRequest {
                workflow: workflow.name.clone(),
                entry: step.entry.clone(),
                route: step.route.clone(),
                payload: step.payload_bytes,
                context,
                at,
            })
            .map_err(|e| match e {
                Error::NotDeployed(f) => Error::UnknownEndpoint(f),
                other => other,
            })?;
            at += crate::time::ms(step.think_ms);
        }
        launched.push(Launched {
            context,
            workflow: workflow.name.clone(),
            at: arrival.at,
            requests: workflow.steps.len(),
        });
    }
    Ok(launched)
}

/// Arrival counts per phase index.
pub fn counts_per_phase(arrivals: &[Arrival]) -> BTreeMap<usize, usize> {
    let mut counts = BTreeMap::new();
    for a in arrivals {
        *counts.entry(a.phase).or_default() += 1;
    }
    counts
}
