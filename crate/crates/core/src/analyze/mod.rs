//! Offline drill-down over trace logs: call trees, latency decomposition,
//! trigger metrics, cold starts and summary tables.

mod decompose;
mod export;
mod metrics;
mod parse;
mod stats;
mod tree;

use std::collections::BTreeMap;

use serde::Serialize;

pub use decompose::{
    decompose, estimate_skew_corrected_network, Components, EdgeCost, EdgeKind, LatencyBreakdown, NetworkEstimate,
    NodeCost, RootBreakdown,
};
pub use export::{write_reports, REPORT_FILES};
pub use metrics::{
    by_route, coldstart_report, trigger_metrics, ColdstartReport, PhaseColdCount, TimelineBucket, TriggerSample,
};
pub use parse::{parse_logs, ParseReport, ParsedLog};
pub use stats::{quantile, summarize, Groups, SummaryStats};
pub use tree::{build_trees, CallTree, Edge, Inbound, Node};

use crate::loadgen::PhaseWindow;

/// Everything derived from one log.
#[derive(Debug, Clone, Serialize)]
pub struct Analysis {
    pub report: ParseReport,
    pub dropped: BTreeMap<String, u64>,
    pub phases: Vec<PhaseWindow>,
    pub contexts: usize,
    pub complete: usize,
    pub incomplete: usize,
    #[serde(skip)]
    pub breakdowns: Vec<LatencyBreakdown>,
    #[serde(skip)]
    pub estimates: Vec<NetworkEstimate>,
    #[serde(skip)]
    pub triggers: Vec<TriggerSample>,
    pub coldstart: ColdstartReport,
    pub summary: BTreeMap<String, SummaryStats>,
}

fn route(from: &str, to: &str) -> String {
    format!("{from}->{to}")
}

/// Runs every analysis over a parsed log. Latency metrics come from complete
/// trees only; what incomplete trees would have contributed is counted as
/// dropped per group.
pub fn analyze(log: &ParsedLog) -> Analysis {
    let trees = build_trees(&log.records);
    let mut groups = Groups::default();
    for g in ["round_trip", "compute", "network", "db", "network_estimate"] {
        groups.touch(g);
    }
    let mut breakdowns = Vec::new();
    let mut estimates = Vec::new();
    for tree in &trees {
        let Ok(b) = decompose(tree) else {
            for root in &tree.roots {
                for g in ["round_trip", "compute", "network", "db"] {
                    groups.drop_sample(g);
                }
                groups.drop_sample(format!("round_trip/{}", root.call.function));
            }
            continue;
        };
        for r in &b.roots {
            groups.push("round_trip", r.round_trip);
            groups.push(format!("round_trip/{}", r.workflow), r.round_trip);
            groups.push("compute", r.components.compute);
            groups.push("network", r.components.network);
            groups.push("db", r.components.db);
        }
        for n in &b.nodes {
            groups.push(format!("exec/{}", n.function), n.exec);
        }
        for e in b.edges.iter().filter(|e| e.kind == EdgeKind::Db) {
            groups.push(format!("db_call/{}", e.to_function), e.duration);
        }
        for est in estimate_skew_corrected_network(tree) {
            let v = est.one_way_us.round() as i64;
            groups.push("network_estimate", v);
            groups.push(format!("network_estimate/{}", route(&est.from_platform, &est.to_platform)), v);
            estimates.push(est);
        }
        breakdowns.push(b);
    }

    let triggers = trigger_metrics(&trees);
    for t in &triggers {
        let r = route(&t.origin, &t.destination);
        groups.push(format!("publish_latency/{r}"), t.publish_latency);
        if let Some(d) = t.trigger_delay {
            groups.push(format!("trigger_delay/{r}"), d);
        }
    }

    let complete = trees.iter().filter(|t| t.complete).count();
    Analysis {
        report: log.report.clone(),
        dropped: log.dropped.clone(),
        phases: log.phases.clone(),
        contexts: trees.len(),
        complete,
        incomplete: trees.len() - complete,
        breakdowns,
        estimates,
        triggers,
        coldstart: coldstart_report(&log.records, &log.phases, None),
        summary: groups.summarize(),
    }
}

impl Analysis {
    pub fn metric(&self, name: &str) -> Option<&SummaryStats> {
        self.summary.get(name)
    }

    pub fn roots(&self) -> impl Iterator<Item = &RootBreakdown> {
        self.breakdowns.iter().flat_map(|b| &b.roots)
    }
}
