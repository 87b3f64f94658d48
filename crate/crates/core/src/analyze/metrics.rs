use std::collections::BTreeMap;

use serde::Serialize;

use super::stats::{summarize, SummaryStats};
use super::tree::CallTree;
use crate::loadgen::PhaseWindow;
use crate::time::{Micros, MICROS_PER_SEC};
use crate::trace::{CallMode, ContextId, ExecutorKey, PairId, RecordBody, TraceRecord};

/// One async hop: caller → publisher → triggered function.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TriggerSample {
    pub context: ContextId,
    pub pair: PairId,
    /// Platform of the publishing caller.
    pub origin: String,
    /// Platform of the publisher and the triggered function.
    pub destination: String,
    pub caller: String,
    pub target: String,
    /// Async call duration minus publisher execution.
    pub publish_latency: Micros,
    /// Triggered start minus publisher start; `None` if nothing was triggered.
    pub trigger_delay: Option<Micros>,
}

/// Publish latency and trigger delay for every async edge of complete trees.
pub fn trigger_metrics(trees: &[CallTree]) -> Vec<TriggerSample> {
    let mut out = Vec::new();
    for tree in trees.iter().filter(|t| t.complete) {
        for node in tree.nodes.iter().filter(|n| !n.is_publisher()) {
            for call in node.calls.iter().filter(|c| c.mode() == CallMode::Async) {
                let publisher = &tree.nodes[call.child.expect("complete tree")];
                let triggered = publisher
                    .calls
                    .iter()
                    .find(|c| c.mode() == CallMode::Async)
                    .map(|c| &tree.nodes[c.child.expect("complete tree")]);
                let target = match &call.call.body {
                    RecordBody::OutgoingCall { callee, .. } => callee.clone(),
                    _ => unreachable!(),
                };
                out.push(TriggerSample {
                    context: tree.context,
                    pair: call.pair(),
                    origin: node.invocation.platform.clone(),
                    destination: publisher.invocation.platform.clone(),
                    caller: node.invocation.function.clone(),
                    target: triggered.map_or(target, |t| t.invocation.function.clone()),
                    publish_latency: call.call.duration() - publisher.exec(),
                    trigger_delay: triggered.map(|t| t.invocation.start - publisher.invocation.start),
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PhaseColdCount {
    pub name: String,
    pub kind: String,
    pub start: Micros,
    pub end: Micros,
    pub invocations: usize,
    pub cold: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TimelineBucket {
    /// Seconds since the peak phase began.
    pub second: u32,
    pub invocations: usize,
    pub cold: usize,
    pub exec: SummaryStats,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ColdstartReport {
    pub function: Option<String>,
    pub phases: Vec<PhaseColdCount>,
    pub peak_phase: Option<String>,
    pub steady_phase: Option<String>,
    pub steady_exec: SummaryStats,
    pub timeline: Vec<TimelineBucket>,
    pub cold_exec: SummaryStats,
    pub warm_exec: SummaryStats,
    /// Executor keys seen for the first time, which should equal the cold flags.
    pub first_seen: usize,
    /// Invocations whose cold flag disagrees with first appearance of their key.
    pub flag_mismatches: usize,
}

impl ColdstartReport {
    pub fn total_cold(&self) -> usize {
        self.phases.iter().map(|p| p.cold).sum()
    }

    pub fn phase(&self, name: &str) -> Option<&PhaseColdCount> {
        self.phases.iter().find(|p| p.name == name)
    }
}

const TIMELINE_SECONDS: u32 = 30;

/// Cold starts per load phase and a per-second execution timeline for the
/// first half minute of the last active phase. Uses every invocation record,
/// complete tree or not. `function` restricts the exec statistics and counts
/// to one function.
pub fn coldstart_report(records: &[TraceRecord], phases: &[PhaseWindow], function: Option<&str>) -> ColdstartReport {
    let mut invocations: Vec<(&TraceRecord, ExecutorKey, bool)> = records
        .iter()
        .filter_map(|r| match r.body {
            RecordBody::Invocation { executor, cold_start, .. } => Some((r, executor, cold_start)),
            _ => None,
        })
        .collect();
    invocations.sort_by_key(|(r, ..)| (r.start, r.end));

    // First appearance is judged over all functions; keys are unique per executor.
    let mut seen = std::collections::BTreeSet::new();
    let mut first_seen = 0;
    let mut mismatches = 0;
    let mut selected = Vec::new();
    for &(r, key, cold) in &invocations {
        let first = seen.insert(key);
        if function.is_none_or(|f| r.function == f) {
            first_seen += first as usize;
            mismatches += (first != cold) as usize;
            selected.push((r, cold));
        }
    }

    let phases: Vec<PhaseWindow> = if phases.is_empty() {
        let end = selected.iter().map(|(r, _)| r.start + 1).max().unwrap_or(0);
        vec![PhaseWindow { name: "all".into(), kind: "all".into(), start: 0, end }]
    } else {
        phases.to_vec()
    };
    let phase_of = |t: Micros| phases.iter().rposition(|p| p.start <= t).unwrap_or(0);

    let mut counts: Vec<PhaseColdCount> = phases
        .iter()
        .map(|p| PhaseColdCount {
            name: p.name.clone(),
            kind: p.kind.clone(),
            start: p.start,
            end: p.end,
            invocations: 0,
            cold: 0,
        })
        .collect();
    let mut per_phase_exec: Vec<Vec<Micros>> = vec![Vec::new(); phases.len()];
    let (mut cold_exec, mut warm_exec) = (Vec::new(), Vec::new());
    for &(r, cold) in &selected {
        let i = phase_of(r.start);
        counts[i].invocations += 1;
        counts[i].cold += cold as usize;
        per_phase_exec[i].push(r.duration());
        if cold { &mut cold_exec } else { &mut warm_exec }.push(r.duration());
    }

    let active = |i: &usize| phases[*i].kind != "pause";
    let peak = (0..phases.len()).rev().find(active);
    let steady = peak.and_then(|p| (0..p).rev().find(active));

    let mut timeline = Vec::new();
    if let Some(p) = peak {
        let start = phases[p].start;
        let mut buckets: Vec<(usize, Vec<Micros>)> = vec![(0, Vec::new()); TIMELINE_SECONDS as usize];
        for &(r, cold) in &selected {
            let offset = r.start - start;
            if offset >= 0 && offset < TIMELINE_SECONDS as Micros * MICROS_PER_SEC {
                let b = &mut buckets[(offset / MICROS_PER_SEC) as usize];
                b.0 += cold as usize;
                b.1.push(r.duration());
            }
        }
        timeline = buckets
            .into_iter()
            .enumerate()
            .map(|(s, (cold, exec))| TimelineBucket {
                second: s as u32,
                invocations: exec.len(),
                cold,
                exec: summarize(&exec),
            })
            .collect();
    }

    ColdstartReport {
        function: function.map(str::to_string),
        peak_phase: peak.map(|p| phases[p].name.clone()),
        steady_phase: steady.map(|s| phases[s].name.clone()),
        steady_exec: steady.map(|s| summarize(&per_phase_exec[s])).unwrap_or_default(),
        phases: counts,
        timeline,
        cold_exec: summarize(&cold_exec),
        warm_exec: summarize(&warm_exec),
        first_seen,
        flag_mismatches: mismatches,
    }
}

/// Per (origin, destination) samples of a trigger metric.
pub fn by_route(
    samples: &[TriggerSample],
    metric: impl Fn(&TriggerSample) -> Option<Micros>,
) -> BTreeMap<(String, String), Vec<Micros>> {
    let mut out: BTreeMap<(String, String), Vec<Micros>> = BTreeMap::new();
    for s in samples {
        if let Some(v) = metric(s) {
            out.entry((s.origin.clone(), s.destination.clone())).or_default().push(v);
        }
    }
    out
}
