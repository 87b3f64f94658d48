use std::collections::BTreeMap;

use serde::Serialize;

use crate::trace::{CallMode, ContextId, PairId, RecordBody, RecordKind, TraceRecord};

/// How a node was reached from its parent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Inbound {
    /// Called by the load generator.
    Root,
    Sync,
    /// An event handed to a publisher.
    Publish,
    /// Triggered by a publisher.
    Trigger,
    /// No parent record was found.
    Orphan,
}

#[derive(Debug, Clone)]
pub struct Edge {
    pub call: TraceRecord,
    /// Node index of the callee, if its invocation record was found.
    pub child: Option<usize>,
}

impl Edge {
    pub fn pair(&self) -> PairId {
        self.call.pair().expect("outgoing calls carry a pair")
    }

    pub fn mode(&self) -> CallMode {
        match self.call.body {
            RecordBody::OutgoingCall { mode, .. } => mode,
            _ => unreachable!("edges are outgoing calls"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Node {
    pub invocation: TraceRecord,
    pub inbound: Inbound,
    /// Parent node index; `None` for nodes called by the load generator and orphans.
    pub parent: Option<usize>,
    pub calls: Vec<Edge>,
    pub db: Vec<TraceRecord>,
}

impl Node {
    pub fn pair(&self) -> PairId {
        self.invocation.pair().expect("invocations carry a pair")
    }

    pub fn exec(&self) -> i64 {
        self.invocation.duration()
    }

    pub fn cold_start(&self) -> bool {
        matches!(self.invocation.body, RecordBody::Invocation { cold_start: true, .. })
    }

    pub fn is_publisher(&self) -> bool {
        self.invocation.function.starts_with("publisher@")
    }
}

/// All records of one context, linked through pair ids.
#[derive(Debug, Clone)]
pub struct CallTree {
    pub context: ContextId,
    /// Load generator calls, one per workflow step.
    pub roots: Vec<Edge>,
    pub nodes: Vec<Node>,
    /// Calls whose pair matched no invocation.
    pub unmatched_pairs: usize,
    /// Call and db records whose emitting invocation is missing.
    pub strays: Vec<TraceRecord>,
    pub complete: bool,
}

impl CallTree {
    /// True when the context lost its load generator record and hangs off a
    /// synthetic root.
    pub fn synthetic_root(&self) -> bool {
        self.roots.is_empty()
    }

    pub fn orphans(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].inbound == Inbound::Orphan)
    }

    pub fn record_count(&self) -> usize {
        self.roots.len() + self.strays.len() + self.nodes.iter().map(|n| 1 + n.calls.len() + n.db.len()).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        fn depth(tree: &CallTree, node: usize) -> usize {
            1 + tree.nodes[node].calls.iter().filter_map(|e| e.child).map(|c| depth(tree, c)).max().unwrap_or(0)
        }
        let starts = self.roots.iter().filter_map(|e| e.child).chain(self.orphans());
        starts.map(|n| depth(self, n)).max().unwrap_or(0)
    }

    /// (callee pair, parent pair, function, platform, inbound) per node.
    pub fn links(&self) -> Vec<(PairId, Option<PairId>, String, String, Inbound)> {
        self.nodes
            .iter()
            .map(|n| {
                let parent = n.parent.map(|p| self.nodes[p].pair());
                (n.pair(), parent, n.invocation.function.clone(), n.invocation.platform.clone(), n.inbound)
            })
            .collect()
    }
}

/// Groups records by context and links them. Trees come out sorted by
/// context id; every record lands in exactly one tree.
pub fn build_trees(records: &[TraceRecord]) -> Vec<CallTree> {
    let mut by_context: BTreeMap<ContextId, Vec<&TraceRecord>> = BTreeMap::new();
    for r in records {
        by_context.entry(r.context).or_default().push(r);
    }
    by_context.into_iter().map(|(context, records)| build_one(context, &records)).collect()
}

fn build_one(context: ContextId, records: &[&TraceRecord]) -> CallTree {
    let mut nodes: Vec<Node> = Vec::new();
    let mut by_pair: BTreeMap<PairId, usize> = BTreeMap::new();
    for r in records.iter().filter(|r| r.kind() == RecordKind::Invocation) {
        by_pair.insert(r.pair().expect("invocation pair"), nodes.len());
        nodes.push(Node {
            invocation: (*r).clone(),
            inbound: Inbound::Orphan,
            parent: None,
            calls: Vec::new(),
            db: Vec::new(),
        });
    }

    let mut roots = Vec::new();
    let mut strays = Vec::new();
    let mut unmatched = 0;
    for r in records {
        match &r.body {
            RecordBody::Invocation { .. } => {}
            RecordBody::OutgoingCall { pair, caller, .. } => {
                let child = by_pair.get(pair).copied();
                if child.is_none() {
                    unmatched += 1;
                }
                let edge = Edge { call: (*r).clone(), child };
                match caller {
                    None => roots.push(edge),
                    Some(c) => match by_pair.get(c) {
                        Some(&parent) => nodes[parent].calls.push(edge),
                        None => strays.push(edge.call),
                    },
                }
            }
            RecordBody::DbCall { caller, .. } => match by_pair.get(caller) {
                Some(&parent) => nodes[parent].db.push((*r).clone()),
                None => strays.push((*r).clone()),
            },
        }
    }

    for edge in &roots {
        if let Some(c) = edge.child {
            nodes[c].inbound = Inbound::Root;
        }
    }
    for p in 0..nodes.len() {
        let publisher = nodes[p].is_publisher();
        for e in 0..nodes[p].calls.len() {
            let edge = &nodes[p].calls[e];
            let inbound = match (edge.mode(), publisher) {
                (CallMode::Sync, _) => Inbound::Sync,
                (CallMode::Async, false) => Inbound::Publish,
                (CallMode::Async, true) => Inbound::Trigger,
            };
            if let Some(c) = edge.child {
                nodes[c].inbound = inbound;
                nodes[c].parent = Some(p);
            }
        }
    }

    let orphans = nodes.iter().any(|n| n.inbound == Inbound::Orphan);
    let complete = unmatched == 0 && strays.is_empty() && !orphans && !roots.is_empty();
    CallTree { context, roots, nodes, unmatched_pairs: unmatched, strays, complete }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{DbOp, ExecutorKey};

    fn inv(function: &str, pair: u128, start: i64, end: i64) -> TraceRecord {
        TraceRecord {
            run_id: "r".into(),
            platform: "p".into(),
            function: function.into(),
            context: ContextId(1),
            start,
            end,
            body: RecordBody::Invocation { pair: PairId(pair), executor: ExecutorKey(pair), cold_start: false },
        }
    }

    fn call(from: &str, caller: Option<u128>, pair: u128, callee: &str, start: i64, end: i64) -> TraceRecord {
        TraceRecord {
            run_id: "r".into(),
            platform: if caller.is_some() { "p".into() } else { "loadgen".into() },
            function: from.into(),
            context: ContextId(1),
            start,
            end,
            body: RecordBody::OutgoingCall {
                pair: PairId(pair),
                callee: callee.into(),
                mode: CallMode::Sync,
                caller: caller.map(PairId),
            },
        }
    }

    #[test]
    fn single_root_depth_one() {
        let records = vec![call("w", None, 1, "f", 0, 10), inv("f", 1, 2, 8)];
        let trees = build_trees(&records);
        assert_eq!(trees.len(), 1);
        assert!(trees[0].complete);
        assert_eq!(trees[0].depth(), 1);
        assert_eq!(trees[0].record_count(), 2);
    }

    #[test]
    fn dropped_callee_marks_incomplete() {
        let db = TraceRecord {
            body: RecordBody::DbCall { op: DbOp::Get, service: "store".into(), caller: PairId(1) },
            ..inv("f", 0, 3, 4)
        };
        let records = vec![call("w", None, 1, "f", 0, 20), inv("f", 1, 1, 19), call("f", Some(1), 2, "g", 5, 15), db];
        let trees = build_trees(&records);
        assert!(!trees[0].complete);
        assert_eq!(trees[0].unmatched_pairs, 1);
        assert_eq!(trees[0].record_count(), 4);
    }

    #[test]
    fn lost_root_gives_orphans() {
        let records = vec![inv("f", 1, 1, 19), call("f", Some(1), 2, "g", 5, 15), inv("g", 2, 6, 14)];
        let tree = &build_trees(&records)[0];
        assert!(tree.synthetic_root());
        assert!(!tree.complete);
        assert_eq!(tree.orphans().collect::<Vec<_>>(), vec![0]);
        assert_eq!(tree.nodes[1].inbound, Inbound::Sync);
    }
}
