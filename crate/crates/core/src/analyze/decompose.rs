use serde::Serialize;

use super::tree::{CallTree, Inbound, Node};
use crate::error::Error;
use crate::time::Micros;
use crate::trace::{CallMode, ContextId, PairId, TraceRecord};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Components {
    pub compute: Micros,
    pub network: Micros,
    pub db: Micros,
}

impl Components {
    pub fn total(&self) -> Micros {
        self.compute + self.network + self.db
    }

    fn add(&mut self, o: Components) {
        self.compute += o.compute;
        self.network += o.network;
        self.db += o.db;
    }
}

/// Split of one load generator request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RootBreakdown {
    pub pair: PairId,
    pub workflow: String,
    pub entry: String,
    pub sent: Micros,
    pub round_trip: Micros,
    pub components: Components,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NodeCost {
    pub pair: PairId,
    pub function: String,
    pub platform: String,
    pub exec: Micros,
    /// Execution time not spent waiting on calls or the store.
    pub compute: Micros,
    pub cold_start: bool,
    pub inbound: Inbound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Root,
    Sync,
    Publish,
    Trigger,
    Db,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EdgeCost {
    pub kind: EdgeKind,
    pub caller: Option<PairId>,
    pub pair: Option<PairId>,
    pub from_function: String,
    pub from_platform: String,
    pub to_function: String,
    pub to_platform: String,
    pub duration: Micros,
    /// Call duration minus callee execution; the whole duration for db calls.
    /// `None` for triggers, whose cost is the trigger delay.
    pub cost: Option<Micros>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LatencyBreakdown {
    pub context: ContextId,
    pub roots: Vec<RootBreakdown>,
    pub nodes: Vec<NodeCost>,
    pub edges: Vec<EdgeCost>,
}

/// A stretch of time an invocation spent blocked.
enum Block {
    Call {
        span: Micros,
        callee: usize,
    },
    Db(Micros),
    /// Overlapping calls, charged as one network wait.
    Parallel(Micros),
}

fn blocks(node: &Node) -> Vec<Block> {
    let mut spans: Vec<(Micros, Micros, Option<usize>)> = node
        .calls
        .iter()
        .filter(|e| e.mode() == CallMode::Sync)
        .map(|e| (e.call.start, e.call.end, e.child))
        .chain(node.db.iter().map(|d| (d.start, d.end, None)))
        .collect();
    spans.sort_by_key(|&(s, e, _)| (s, e));

    let mut out = Vec::new();
    let mut i = 0;
    while i < spans.len() {
        let (start, mut end, child) = spans[i];
        let mut j = i + 1;
        while j < spans.len() && spans[j].0 < end {
            end = end.max(spans[j].1);
            j += 1;
        }
        out.push(match (j - i, child) {
            (1, Some(callee)) => Block::Call { span: end - start, callee },
            (1, None) => Block::Db(end - start),
            _ => Block::Parallel(end - start),
        });
        i = j;
    }
    out
}

fn own_compute(node: &Node) -> Micros {
    let blocked: Micros = blocks(node)
        .iter()
        .map(|b| match b {
            Block::Call { span, .. } | Block::Db(span) | Block::Parallel(span) => *span,
        })
        .sum();
    node.exec() - blocked
}

/// Critical-path split of an invocation: its own compute plus every
/// blocking wait, recursing into sequential sync callees.
fn critical(tree: &CallTree, n: usize) -> Components {
    let node = &tree.nodes[n];
    let mut c = Components { compute: own_compute(node), ..Default::default() };
    for block in blocks(node) {
        match block {
            Block::Call { span, callee } => {
                c.network += span - tree.nodes[callee].exec();
                c.add(critical(tree, callee));
            }
            Block::Db(span) => c.db += span,
            Block::Parallel(span) => c.network += span,
        }
    }
    c
}

fn edge(
    kind: EdgeKind,
    call: &TraceRecord,
    caller: Option<&Node>,
    callee: Option<&Node>,
    cost: Option<Micros>,
) -> EdgeCost {
    EdgeCost {
        kind,
        caller: caller.map(Node::pair),
        pair: call.pair(),
        from_function: call.function.clone(),
        from_platform: call.platform.clone(),
        to_function: callee.map(|c| c.invocation.function.clone()).unwrap_or_default(),
        to_platform: callee.map(|c| c.invocation.platform.clone()).unwrap_or_default(),
        duration: call.duration(),
        cost,
    }
}

/// Splits every request of a complete tree into compute, network and db time.
pub fn decompose(tree: &CallTree) -> Result<LatencyBreakdown, Error> {
    if !tree.complete {
        return Err(Error::IncompleteTree(tree.context));
    }
    let mut roots = Vec::new();
    let mut edges = Vec::new();
    for root in &tree.roots {
        let entry = &tree.nodes[root.child.expect("complete tree")];
        let mut components = Components { network: root.call.duration() - entry.exec(), ..Default::default() };
        components.add(critical(tree, root.child.unwrap()));
        roots.push(RootBreakdown {
            pair: root.pair(),
            workflow: root.call.function.clone(),
            entry: entry.invocation.function.clone(),
            sent: root.call.start,
            round_trip: root.call.duration(),
            components,
        });
        edges.push(edge(EdgeKind::Root, &root.call, None, Some(entry), Some(root.call.duration() - entry.exec())));
    }

    let mut nodes = Vec::new();
    for node in &tree.nodes {
        nodes.push(NodeCost {
            pair: node.pair(),
            function: node.invocation.function.clone(),
            platform: node.invocation.platform.clone(),
            exec: node.exec(),
            compute: own_compute(node),
            cold_start: node.cold_start(),
            inbound: node.inbound,
        });
        for call in &node.calls {
            let callee = &tree.nodes[call.child.expect("complete tree")];
            let (kind, cost) = match (call.mode(), node.is_publisher()) {
                (CallMode::Sync, _) => (EdgeKind::Sync, Some(call.call.duration() - callee.exec())),
                (CallMode::Async, false) => (EdgeKind::Publish, Some(call.call.duration() - callee.exec())),
                (CallMode::Async, true) => (EdgeKind::Trigger, None),
            };
            edges.push(edge(kind, &call.call, Some(node), Some(callee), cost));
        }
        for db in &node.db {
            let mut e = edge(EdgeKind::Db, db, Some(node), None, Some(db.duration()));
            if let crate::trace::RecordBody::DbCall { service, .. } = &db.body {
                e.to_function = service.clone();
            }
            edges.push(e);
        }
    }
    Ok(LatencyBreakdown { context: tree.context, roots, nodes, edges })
}

/// One-way network estimate for a call, assuming both legs took equally long.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkEstimate {
    pub pair: PairId,
    pub mode: CallMode,
    pub from_function: String,
    pub from_platform: String,
    pub to_function: String,
    pub to_platform: String,
    pub one_way_us: f64,
}

/// Per-edge one-way latency from durations only, so constant per-platform
/// clock offsets cancel. Async publishes have a single leg and are reported
/// as their publish latency; forwarded triggers are skipped.
pub fn estimate_skew_corrected_network(tree: &CallTree) -> Vec<NetworkEstimate> {
    let estimate = |call: &TraceRecord, pair: PairId, mode: CallMode, callee: &Node| {
        let gap = (call.duration() - callee.exec()) as f64;
        NetworkEstimate {
            pair,
            mode,
            from_function: call.function.clone(),
            from_platform: call.platform.clone(),
            to_function: callee.invocation.function.clone(),
            to_platform: callee.invocation.platform.clone(),
            one_way_us: if mode == CallMode::Sync { gap / 2.0 } else { gap },
        }
    };
    let mut out = Vec::new();
    for root in &tree.roots {
        if let Some(c) = root.child {
            out.push(estimate(&root.call, root.pair(), CallMode::Sync, &tree.nodes[c]));
        }
    }
    for node in tree.nodes.iter().filter(|n| !n.is_publisher()) {
        for call in &node.calls {
            if let Some(c) = call.child {
                out.push(estimate(&call.call, call.pair(), call.mode(), &tree.nodes[c]));
            }
        }
    }
    out
}
