use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::platform::{link, PlatformSpec};
use crate::app::TriggerKind;
use crate::deploy::{DeploymentArtifact, DeploymentPlan, Endpoint, ResolvedStep, ServiceBinding};
use crate::dist::Dist;
use crate::error::Error;
use crate::time::Micros;
use crate::trace::{
    dropped_line, CallMode, ContextId, DbOp, ExecutorEnv, ExecutorKey, IdSource, LogSink, PairId, RateLimiter,
    RecordBody, TraceRecord, LOADGEN_PLATFORM,
};

#[derive(Debug)]
enum Op {
    Compute(Dist),
    Call { target: Endpoint, payload: u64 },
    Publish { target: Endpoint, publisher: Endpoint, payload: u64 },
    Db { op: DbOp, key: String, value_size: u64, service: String, latency: Dist },
    Parallel(Vec<Arc<[Op]>>),
    Return(u64),
    Forward,
}

fn lower(steps: &[ResolvedStep]) -> Arc<[Op]> {
    steps
        .iter()
        .map(|s| match s {
            ResolvedStep::Compute { time } => Op::Compute(time.clone()),
            ResolvedStep::Call { target, payload_bytes } => {
                Op::Call { target: target.clone(), payload: *payload_bytes }
            }
            ResolvedStep::Publish { target, publisher, payload_bytes } => {
                Op::Publish { target: target.clone(), publisher: publisher.clone(), payload: *payload_bytes }
            }
            ResolvedStep::Db { op, key, value_size, service } => Op::Db {
                op: *op,
                key: key.clone(),
                value_size: *value_size,
                service: service.name.clone(),
                latency: service.op_latency.clone(),
            },
            ResolvedStep::Parallel { branches } => Op::Parallel(branches.iter().map(|b| lower(b)).collect()),
            ResolvedStep::Return { size } => Op::Return(*size),
            ResolvedStep::Forward => Op::Forward,
        })
        .collect()
}

#[derive(Debug)]
struct Program {
    trigger: TriggerKind,
    body: Arc<[Op]>,
    routes: BTreeMap<String, Arc<[Op]>>,
}

/// Realized time split of one invocation or root call.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Breakdown {
    pub compute: Micros,
    pub network: Micros,
    pub db: Micros,
}

impl Breakdown {
    pub fn total(&self) -> Micros {
        self.compute + self.network + self.db
    }

    fn add(&mut self, other: Breakdown) {
        self.compute += other.compute;
        self.network += other.network;
        self.db += other.db;
    }
}

/// How an invocation was caused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Via {
    Root,
    Sync,
    Async,
    Trigger,
    Direct,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthInvocation {
    pub context: ContextId,
    pub pair: PairId,
    pub function: String,
    pub platform: String,
    /// Inbound pair of the invocation that caused this one.
    pub parent: Option<PairId>,
    pub via: Via,
    pub cold: bool,
    pub executor: ExecutorKey,
    pub arrival: Micros,
    pub end: Micros,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthRoot {
    pub context: ContextId,
    pub pair: PairId,
    pub workflow: String,
    pub entry: String,
    pub sent: Micros,
    pub returned: Micros,
    pub realized: Breakdown,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthExecutor {
    pub platform: String,
    pub function: String,
    pub key: ExecutorKey,
    pub created_at: Micros,
}

/// What actually happened in a run, in true virtual time.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub invocations: Vec<TruthInvocation>,
    pub roots: Vec<TruthRoot>,
    pub executors: Vec<TruthExecutor>,
    pub dropped: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InvocationId(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CallId(usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvocationOutcome {
    pub function: String,
    pub platform: String,
    /// Arrival at the platform; this is the logged start.
    pub start: Micros,
    /// When the body began; later than `start` by the cold-start delay.
    pub body_start: Micros,
    pub end: Micros,
    pub cold_start: bool,
    pub executor: ExecutorKey,
    pub response_size: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CallOutcome {
    pub sent: Micros,
    /// Response time for sync calls, publisher acceptance for async ones.
    pub completed: Micros,
}

#[derive(Debug, Clone)]
enum Origin {
    Root { root: usize },
    Sync { caller: usize, task: usize, sent: Micros, out: Micros },
    Async { caller: usize, sent: Micros },
    Trigger { publisher: usize },
    Direct,
    External { call: usize, from: String, mode: CallMode },
}

#[derive(Debug, Clone)]
struct PendingEvent {
    target: Endpoint,
    origin_platform: String,
}

#[derive(Debug)]
struct Inv {
    platform: usize,
    function: String,
    route: Option<String>,
    context: ContextId,
    pair: PairId,
    origin: Origin,
    event: Option<PendingEvent>,
    arrival: Micros,
    body_start: Option<Micros>,
    end: Option<Micros>,
    executor: usize,
    key: Option<ExecutorKey>,
    cold: bool,
    response: u64,
    realized: Breakdown,
}

#[derive(Debug)]
struct Task {
    inv: usize,
    ops: Arc<[Op]>,
    pc: usize,
    join: Option<usize>,
    branch: bool,
}

#[derive(Debug)]
struct Join {
    parent: usize,
    remaining: usize,
    forked: Micros,
}

#[derive(Debug)]
struct Executor {
    env: ExecutorEnv,
    last_idle: Micros,
}

#[derive(Debug)]
struct Root {
    context: ContextId,
    pair: PairId,
    workflow: String,
    entry: String,
    sent: Micros,
    out: Micros,
    returned: Option<Micros>,
}

#[derive(Debug)]
struct External {
    sent: Micros,
    completed: Option<Micros>,
}

#[derive(Debug)]
struct PlatformState {
    spec: PlatformSpec,
    programs: BTreeMap<String, Program>,
    /// Idle executors per function, most recently idled last.
    idle: BTreeMap<String, Vec<usize>>,
    sink: LogSink,
}

#[derive(Debug, Clone, Copy)]
enum Event {
    Arrive { inv: usize },
    Resume { task: usize },
    DbReply { task: usize, start: Micros, op: DbOp, service_idx: usize },
    SyncReturn { inv: usize, back: Micros },
    RootReturn { inv: usize, back: Micros },
}

struct Rngs {
    compute: ChaCha8Rng,
    network: ChaCha8Rng,
    cold: ChaCha8Rng,
    trigger: ChaCha8Rng,
    db: ChaCha8Rng,
}

impl Rngs {
    fn new(seed: u64) -> Self {
        let stream = |n: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(n);
            rng
        };
        Rngs { compute: stream(1), network: stream(2), cold: stream(3), trigger: stream(4), db: stream(5) }
    }
}

/// A request issued by the load generator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RootRequest {
    pub workflow: String,
    pub entry: String,
    pub route: Option<String>,
    pub payload: u64,
    pub context: ContextId,
    pub at: Micros,
}

/// Everything a finished run leaves behind.
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub run_id: String,
    /// Platform id to its log lines, including a trailing drop-count line.
    pub platform_logs: BTreeMap<String, Vec<String>>,
    pub loadgen_log: Vec<String>,
    pub truth: GroundTruth,
}

/// One deterministic run over a set of deployed artifacts.
pub struct Simulation {
    run_id: String,
    specs: Vec<PlatformSpec>,
    services: BTreeMap<String, ServiceBinding>,
    service_names: Vec<String>,
    stores: BTreeMap<String, BTreeMap<String, u64>>,
    platforms: Vec<PlatformState>,
    index: BTreeMap<String, usize>,
    overhead: u64,
    queue: BinaryHeap<Reverse<(Micros, u64)>>,
    events: BTreeMap<u64, Event>,
    seq: u64,
    now: Micros,
    rng: Rngs,
    ids: IdSource,
    invs: Vec<Inv>,
    tasks: Vec<Task>,
    joins: Vec<Join>,
    executors: Vec<Executor>,
    roots: Vec<Root>,
    externals: Vec<External>,
    loadgen: LogSink,
    truth: GroundTruth,
}

const ID_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

impl Simulation {
    pub fn from_plan(run_id: &str, plan: &DeploymentPlan, seed: u64) -> Result<Self, Error> {
        Self::new(
            run_id,
            plan.artifacts.clone(),
            plan.platforms.clone(),
            plan.services.clone(),
            plan.tracing_overhead_bytes,
            seed,
        )
    }

    pub fn new(
        run_id: &str,
        artifacts: Vec<DeploymentArtifact>,
        specs: Vec<PlatformSpec>,
        services: BTreeMap<String, ServiceBinding>,
        tracing_overhead_bytes: u64,
        seed: u64,
    ) -> Result<Self, Error> {
        let mut platforms = Vec::new();
        let mut index = BTreeMap::new();
        for artifact in artifacts {
            let programs = artifact
                .functions
                .iter()
                .map(|f| {
                    let program = Program {
                        trigger: f.trigger,
                        body: lower(&f.body),
                        routes: f.routes.iter().map(|(k, v)| (k.clone(), lower(v))).collect(),
                    };
                    (f.name.clone(), program)
                })
                .collect();
            index.insert(artifact.platform.id.clone(), platforms.len());
            platforms.push(PlatformState {
                sink: LogSink::new(RateLimiter::new(artifact.platform.log_rate_limit)),
                spec: artifact.platform,
                programs,
                idle: BTreeMap::new(),
            });
        }
        let service_names: Vec<String> = services.keys().cloned().collect();
        let sim = Simulation {
            run_id: run_id.to_string(),
            specs,
            stores: service_names.iter().map(|s| (s.clone(), BTreeMap::new())).collect(),
            services,
            service_names,
            platforms,
            index,
            overhead: tracing_overhead_bytes,
            queue: BinaryHeap::new(),
            events: BTreeMap::new(),
            seq: 0,
            now: 0,
            rng: Rngs::new(seed),
            ids: IdSource::new(seed ^ ID_SEED_SALT),
            invs: Vec::new(),
            tasks: Vec::new(),
            joins: Vec::new(),
            executors: Vec::new(),
            roots: Vec::new(),
            externals: Vec::new(),
            loadgen: LogSink::new(RateLimiter::unlimited()),
            truth: GroundTruth::default(),
        };
        sim.check_targets()?;
        Ok(sim)
    }

    fn check_targets(&self) -> Result<(), Error> {
        fn walk(sim: &Simulation, here: &str, ops: &[Op]) -> Result<(), Error> {
            for op in ops {
                match op {
                    Op::Call { target, .. } => sim.require(here, target)?,
                    Op::Publish { target, publisher, .. } => {
                        sim.require(here, target)?;
                        sim.require(here, publisher)?;
                    }
                    Op::Db { service, .. } => {
                        if !sim.services.contains_key(service) {
                            return Err(Error::NoServiceBinding(service.clone()));
                        }
                    }
                    Op::Parallel(branches) => branches.iter().try_for_each(|b| walk(sim, here, b))?,
                    _ => {}
                }
            }
            Ok(())
        }
        for p in &self.platforms {
            for program in p.programs.values() {
                walk(self, &p.spec.id, &program.body)?;
                for ops in program.routes.values() {
                    walk(self, &p.spec.id, ops)?;
                }
            }
        }
        Ok(())
    }

    fn require(&self, here: &str, target: &Endpoint) -> Result<(), Error> {
        let deployed = self
            .index
            .get(&target.platform)
            .is_some_and(|&i| self.platforms[i].programs.contains_key(&target.function));
        if !deployed {
            return Err(Error::UnknownEndpoint(target.id()));
        }
        if link(&self.specs, here, &target.platform).is_none() {
            return Err(Error::Config(format!("no latency between `{here}` and `{}`", target.platform)));
        }
        Ok(())
    }

    pub fn run_id(&self) -> &str {
        &self.run_id
    }

    pub fn now(&self) -> Micros {
        self.now
    }

    pub fn ids(&mut self) -> &mut IdSource {
        &mut self.ids
    }

    fn schedule(&mut self, at: Micros, event: Event) {
        debug_assert!(at >= self.now);
        let seq = self.seq;
        self.seq += 1;
        self.queue.push(Reverse((at, seq)));
        self.events.insert(seq, event);
    }

    fn platform_index(&self, id: &str) -> Result<usize, Error> {
        self.index.get(id).copied().ok_or_else(|| Error::UnknownPlatform(id.to_string()))
    }

    fn leg(&mut self, from: &str, to: &str, bytes: u64) -> Micros {
        let d = link(&self.specs, from, to).expect("links checked at construction");
        let base = d.sample(&mut self.rng.network);
        let cost = self
            .specs
            .iter()
            .find(|p| p.id == from)
            .or_else(|| self.specs.iter().find(|p| p.id == to))
            .map_or(0.0, |p| p.transfer_us_per_kib);
        if cost == 0.0 {
            return base;
        }
        base + ((bytes + self.overhead) as f64 / 1024.0 * cost).round() as Micros
    }

    #[allow(clippy::too_many_arguments)]
    fn new_inv(
        &mut self,
        platform: usize,
        function: &str,
        route: Option<String>,
        context: ContextId,
        pair: PairId,
        origin: Origin,
        arrival: Micros,
    ) -> usize {
        let id = self.invs.len();
        self.invs.push(Inv {
            platform,
            function: function.to_string(),
            route,
            context,
            pair,
            origin,
            event: None,
            arrival,
            body_start: None,
            end: None,
            executor: usize::MAX,
            key: None,
            cold: false,
            response: 0,
            realized: Breakdown::default(),
        });
        self.schedule(arrival, Event::Arrive { inv: id });
        id
    }

    /// Schedules a direct invocation of `function` arriving at `arrival`.
    pub fn invoke(
        &mut self,
        function: &str,
        context: ContextId,
        pair: PairId,
        arrival: Micros,
    ) -> Result<InvocationId, Error> {
        let platform = self.hosting(function)?;
        Ok(InvocationId(self.new_inv(platform, function, None, context, pair, Origin::Direct, arrival)))
    }

    fn hosting(&self, function: &str) -> Result<usize, Error> {
        self.platforms
            .iter()
            .position(|p| p.programs.contains_key(function))
            .ok_or_else(|| Error::NotDeployed(function.to_string()))
    }

    /// Sends a request from `from` (a platform id or the load generator) to
    /// `target` without a calling invocation.
    pub fn remote_call(
        &mut self,
        from: &str,
        target: &Endpoint,
        mode: CallMode,
        at: Micros,
        context: ContextId,
    ) -> Result<CallId, Error> {
        let p = self.index.get(&target.platform).copied();
        let Some(p) = p.filter(|&p| self.platforms[p].programs.contains_key(&target.function)) else {
            return Err(Error::UnknownEndpoint(target.id()));
        };
        if from != LOADGEN_PLATFORM {
            self.platform_index(from)?;
        }
        if link(&self.specs, from, &target.platform).is_none() {
            return Err(Error::Config(format!("no latency between `{from}` and `{}`", target.platform)));
        }
        let call = self.externals.len();
        self.externals.push(External { sent: at, completed: None });
        let out = self.leg(from, &target.platform, 0);
        if mode == CallMode::Async {
            self.externals[call].completed = Some(at + out);
        }
        let pair = self.ids.new_pair();
        let origin = Origin::External { call, from: from.to_string(), mode };
        self.new_inv(p, &target.function, None, context, pair, origin, at + out);
        Ok(CallId(call))
    }

    /// Hands an event for `function` to the publisher of `platform` at `at`.
    /// Returns the publisher invocation.
    pub fn publish(
        &mut self,
        platform: &str,
        function: &str,
        at: Micros,
        context: ContextId,
    ) -> Result<InvocationId, Error> {
        let p = self.platform_index(platform)?;
        let program = self.platforms[p].programs.get(function).ok_or_else(|| Error::NotDeployed(function.into()))?;
        if program.trigger != TriggerKind::EventAsync {
            return Err(Error::NotAsync(function.to_string()));
        }
        let publisher = crate::deploy::publisher_name(platform);
        if !self.platforms[p].programs.contains_key(&publisher) {
            return Err(Error::NotDeployed(publisher));
        }
        let pair = self.ids.new_pair();
        let inv = self.new_inv(p, &publisher, None, context, pair, Origin::Direct, at);
        self.invs[inv].event =
            Some(PendingEvent { target: Endpoint::new(platform, function), origin_platform: platform.to_string() });
        Ok(InvocationId(inv))
    }

    /// Performs one store operation immediately and returns (reply time, value size).
    pub fn db_op(
        &mut self,
        op: DbOp,
        service: &str,
        key: &str,
        value_size: u64,
        caller_platform: &str,
        at: Micros,
    ) -> Result<(Micros, u64), Error> {
        let binding = self.services.get(service).ok_or_else(|| Error::NoServiceBinding(service.to_string()))?;
        let latency = binding.latency_from(caller_platform).sample(&mut self.rng.db);
        let size = self.apply_store(op, service, key, value_size);
        Ok((at + latency, size))
    }

    fn apply_store(&mut self, op: DbOp, service: &str, key: &str, value_size: u64) -> u64 {
        let store = self.stores.entry(service.to_string()).or_default();
        match op {
            DbOp::Set => {
                store.insert(key.to_string(), value_size);
                value_size
            }
            DbOp::Get => store.get(key).copied().unwrap_or(0),
        }
    }

    /// Schedules a load generator request.
    pub fn submit_root(&mut self, req: RootRequest) -> Result<usize, Error> {
        let p = self.hosting(&req.entry)?;
        let platform_id = self.platforms[p].spec.id.clone();
        if link(&self.specs, LOADGEN_PLATFORM, &platform_id).is_none() {
            return Err(Error::Config(format!("platform `{platform_id}` has no loadgen latency")));
        }
        if let Some(route) = &req.route {
            if !self.platforms[p].programs[&req.entry].routes.contains_key(route) {
                return Err(Error::Config(format!("function `{}` has no route `{route}`", req.entry)));
            }
        }
        let pair = self.ids.new_pair();
        let out = self.leg(LOADGEN_PLATFORM, &platform_id, req.payload);
        let root = self.roots.len();
        self.roots.push(Root {
            context: req.context,
            pair,
            workflow: req.workflow,
            entry: req.entry.clone(),
            sent: req.at,
            out,
            returned: None,
        });
        self.new_inv(p, &req.entry, req.route, req.context, pair, Origin::Root { root }, req.at + out);
        Ok(root)
    }

    pub fn outcome(&self, id: InvocationId) -> Option<InvocationOutcome> {
        let inv = self.invs.get(id.0)?;
        Some(InvocationOutcome {
            function: inv.function.clone(),
            platform: self.platforms[inv.platform].spec.id.clone(),
            start: inv.arrival,
            body_start: inv.body_start?,
            end: inv.end?,
            cold_start: inv.cold,
            executor: inv.key?,
            response_size: inv.response,
        })
    }

    pub fn call_outcome(&self, id: CallId) -> Option<CallOutcome> {
        let call = self.externals.get(id.0)?;
        Some(CallOutcome { sent: call.sent, completed: call.completed? })
    }

    /// Invocations caused by the given one, in creation order.
    pub fn children(&self, id: InvocationId) -> Vec<InvocationId> {
        (0..self.invs.len())
            .filter(|&i| match self.invs[i].origin {
                Origin::Sync { caller, .. } | Origin::Async { caller, .. } => caller == id.0,
                Origin::Trigger { publisher } => publisher == id.0,
                _ => false,
            })
            .map(InvocationId)
            .collect()
    }

    pub fn root_returned(&self, root: usize) -> Option<Micros> {
        self.roots.get(root)?.returned
    }

    /// Processes events in (time, insertion) order until none are left.
    pub fn run_until_idle(&mut self) {
        while let Some(Reverse((at, seq))) = self.queue.pop() {
            let event = self.events.remove(&seq).expect("scheduled event");
            self.now = at;
            self.handle(event);
        }
    }

    fn handle(&mut self, event: Event) {
        match event {
            Event::Arrive { inv } => self.arrive(inv),
            Event::Resume { task } => self.run_task(task),
            Event::DbReply { task, start, op, service_idx } => {
                let inv = self.tasks[task].inv;
                let service = self.service_names[service_idx].clone();
                let caller = self.invs[inv].pair;
                let record = self.record(inv, start, self.now, RecordBody::DbCall { op, service, caller });
                self.emit_platform(self.invs[inv].platform, &record);
                self.run_task(task);
            }
            Event::SyncReturn { inv, back } => {
                let Origin::Sync { caller, task, sent, out } = self.invs[inv].origin else {
                    unreachable!("sync return for a non-sync invocation")
                };
                let callee_realized = self.invs[inv].realized;
                let record = self.record(
                    caller,
                    sent,
                    self.now,
                    RecordBody::OutgoingCall {
                        pair: self.invs[inv].pair,
                        callee: self.invs[inv].function.clone(),
                        mode: CallMode::Sync,
                        caller: Some(self.invs[caller].pair),
                    },
                );
                self.emit_platform(self.invs[caller].platform, &record);
                self.account(task, |b| {
                    b.add(callee_realized);
                    b.network += out + back;
                });
                self.run_task(task);
            }
            Event::RootReturn { inv, back } => {
                let Origin::Root { root } = self.invs[inv].origin else { unreachable!("root return") };
                let r = &mut self.roots[root];
                r.returned = Some(self.now);
                let record = TraceRecord {
                    run_id: self.run_id.clone(),
                    platform: LOADGEN_PLATFORM.into(),
                    function: r.workflow.clone(),
                    context: r.context,
                    start: r.sent,
                    end: self.now,
                    body: RecordBody::OutgoingCall {
                        pair: r.pair,
                        callee: r.entry.clone(),
                        mode: CallMode::Sync,
                        caller: None,
                    },
                };
                let mut realized = self.invs[inv].realized;
                realized.network += r.out + back;
                self.truth.roots.push(TruthRoot {
                    context: r.context,
                    pair: r.pair,
                    workflow: r.workflow.clone(),
                    entry: r.entry.clone(),
                    sent: r.sent,
                    returned: self.now,
                    realized,
                });
                self.loadgen.emit(&record, self.now).expect("well-formed loadgen record");
            }
        }
    }

    fn arrive(&mut self, i: usize) {
        let p = self.invs[i].platform;
        let function = self.invs[i].function.clone();
        let keep_alive = self.platforms[p].spec.keep_alive();
        let now = self.now;
        let pool = self.platforms[p].idle.entry(function.clone()).or_default();
        pool.retain(|&e| self.executors[e].last_idle + keep_alive >= now);
        let warm = pool.pop();
        let executor = warm.unwrap_or_else(|| {
            self.executors.push(Executor { env: ExecutorEnv::new(), last_idle: now });
            self.executors.len() - 1
        });
        let (key, cold) = self.executors[executor].env.observe(&mut self.ids);
        let cold_wait = if cold {
            self.truth.executors.push(TruthExecutor {
                platform: self.platforms[p].spec.id.clone(),
                function: function.clone(),
                key,
                created_at: now,
            });
            self.platforms[p].spec.cold_start.sample(&mut self.rng.cold)
        } else {
            0
        };
        let program = &self.platforms[p].programs[&function];
        let ops = self.invs[i].route.as_ref().and_then(|r| program.routes.get(r)).unwrap_or(&program.body).clone();
        let inv = &mut self.invs[i];
        inv.executor = executor;
        inv.key = Some(key);
        inv.cold = cold;
        inv.body_start = Some(now + cold_wait);
        inv.realized.compute += cold_wait;
        let task = self.tasks.len();
        self.tasks.push(Task { inv: i, ops, pc: 0, join: None, branch: false });
        self.schedule(now + cold_wait, Event::Resume { task });
    }

    fn account(&mut self, task: usize, f: impl FnOnce(&mut Breakdown)) {
        let t = &self.tasks[task];
        if !t.branch {
            f(&mut self.invs[t.inv].realized);
        }
    }

    fn run_task(&mut self, t: usize) {
        loop {
            let (inv, ops, pc) = {
                let task = &self.tasks[t];
                (task.inv, task.ops.clone(), task.pc)
            };
            let Some(op) = ops.get(pc) else {
                self.finish_task(t);
                return;
            };
            self.tasks[t].pc += 1;
            let here = self.invs[inv].platform;
            let context = self.invs[inv].context;
            match op {
                Op::Compute(d) => {
                    let d = d.sample(&mut self.rng.compute);
                    self.account(t, |b| b.compute += d);
                    self.schedule(self.now + d, Event::Resume { task: t });
                    return;
                }
                Op::Call { target, payload } => {
                    let callee_platform = self.index[&target.platform];
                    let from = self.platforms[here].spec.id.clone();
                    let out = self.leg(&from, &target.platform, *payload);
                    let pair = self.ids.new_pair();
                    let origin = Origin::Sync { caller: inv, task: t, sent: self.now, out };
                    let at = self.now + out;
                    self.new_inv(callee_platform, &target.function, None, context, pair, origin, at);
                    return;
                }
                Op::Publish { target, publisher, payload } => {
                    let dest = self.index[&publisher.platform];
                    let from = self.platforms[here].spec.id.clone();
                    let out = self.leg(&from, &publisher.platform, *payload);
                    let pair = self.ids.new_pair();
                    let origin = Origin::Async { caller: inv, sent: self.now };
                    let at = self.now + out;
                    let p = self.new_inv(dest, &publisher.function, None, context, pair, origin, at);
                    self.invs[p].event = Some(PendingEvent { target: target.clone(), origin_platform: from });
                }
                Op::Db { op, key, value_size, service, latency } => {
                    let d = latency.sample(&mut self.rng.db);
                    self.apply_store(*op, service, key, *value_size);
                    self.account(t, |b| b.db += d);
                    let service_idx = self.service_names.iter().position(|s| s == service).expect("bound service");
                    let start = self.now;
                    self.schedule(self.now + d, Event::DbReply { task: t, start, op: *op, service_idx });
                    return;
                }
                Op::Parallel(branches) => {
                    let join = self.joins.len();
                    self.joins.push(Join { parent: t, remaining: branches.len(), forked: self.now });
                    for ops in branches {
                        let task = self.tasks.len();
                        self.tasks.push(Task { inv, ops: ops.clone(), pc: 0, join: Some(join), branch: true });
                        self.schedule(self.now, Event::Resume { task });
                    }
                    return;
                }
                Op::Return(size) => self.invs[inv].response = *size,
                Op::Forward => self.forward(inv),
            }
        }
    }

    fn forward(&mut self, publisher: usize) {
        let Some(event) = self.invs[publisher].event.clone() else {
            return;
        };
        let p = self.invs[publisher].platform;
        let dest = self.index[&event.target.platform];
        debug_assert_eq!(p, dest, "publisher runs where the triggered function lives");
        let delay = self.platforms[p].spec.trigger_delay_for(&event.origin_platform).clone();
        let delay = delay.sample(&mut self.rng.trigger);
        let pair = self.ids.new_pair();
        let context = self.invs[publisher].context;
        let record = self.record(
            publisher,
            self.now,
            self.now,
            RecordBody::OutgoingCall {
                pair,
                callee: event.target.function.clone(),
                mode: CallMode::Async,
                caller: Some(self.invs[publisher].pair),
            },
        );
        self.emit_platform(p, &record);
        let at = self.now + delay;
        self.new_inv(dest, &event.target.function, None, context, pair, Origin::Trigger { publisher }, at);
    }

    fn finish_task(&mut self, t: usize) {
        match self.tasks[t].join {
            Some(j) => {
                let join = &mut self.joins[j];
                join.remaining -= 1;
                if join.remaining == 0 {
                    let (parent, span) = (join.parent, self.now - join.forked);
                    self.account(parent, |b| b.network += span);
                    self.schedule(self.now, Event::Resume { task: parent });
                }
            }
            None => self.complete(self.tasks[t].inv),
        }
    }

    fn complete(&mut self, i: usize) {
        let now = self.now;
        let inv = &mut self.invs[i];
        inv.end = Some(now);
        let p = inv.platform;
        let executor = inv.executor;
        self.executors[executor].last_idle = now;
        let function = inv.function.clone();
        self.platforms[p].idle.entry(function.clone()).or_default().push(executor);

        let inv = &self.invs[i];
        let key = inv.key.expect("executor observed at arrival");
        let record = self.record(
            i,
            inv.arrival,
            now,
            RecordBody::Invocation { pair: inv.pair, executor: key, cold_start: inv.cold },
        );

        let (parent, via) = match &inv.origin {
            Origin::Root { .. } => (None, Via::Root),
            Origin::Sync { caller, .. } => (Some(self.invs[*caller].pair), Via::Sync),
            Origin::Async { caller, .. } => (Some(self.invs[*caller].pair), Via::Async),
            Origin::Trigger { publisher } => (Some(self.invs[*publisher].pair), Via::Trigger),
            Origin::Direct | Origin::External { .. } => (None, Via::Direct),
        };
        self.truth.invocations.push(TruthInvocation {
            context: inv.context,
            pair: inv.pair,
            function,
            platform: self.platforms[p].spec.id.clone(),
            parent,
            via,
            cold: inv.cold,
            executor: key,
            arrival: inv.arrival,
            end: now,
        });

        let here = self.platforms[p].spec.id.clone();
        let response = inv.response;
        let origin = inv.origin.clone();
        self.emit_platform(p, &record);
        match origin {
            Origin::Root { .. } => {
                let back = self.leg(&here, LOADGEN_PLATFORM, response);
                self.schedule(now + back, Event::RootReturn { inv: i, back });
            }
            Origin::Sync { caller, .. } => {
                let to = self.platforms[self.invs[caller].platform].spec.id.clone();
                let back = self.leg(&here, &to, response);
                self.schedule(now + back, Event::SyncReturn { inv: i, back });
            }
            Origin::Async { caller, sent } => {
                let record = self.record(
                    caller,
                    sent,
                    now,
                    RecordBody::OutgoingCall {
                        pair: self.invs[i].pair,
                        callee: self.invs[i].function.clone(),
                        mode: CallMode::Async,
                        caller: Some(self.invs[caller].pair),
                    },
                );
                self.emit_platform(self.invs[caller].platform, &record);
            }
            Origin::External { call, from, mode: CallMode::Sync } => {
                let back = self.leg(&here, &from, response);
                self.externals[call].completed = Some(now + back);
            }
            Origin::Trigger { .. } | Origin::Direct | Origin::External { .. } => {}
        }
    }

    /// Builds a record emitted by invocation `inv`, shifting true times by its
    /// platform's clock offset.
    fn record(&self, inv: usize, start: Micros, end: Micros, body: RecordBody) -> TraceRecord {
        let inv = &self.invs[inv];
        let spec = &self.platforms[inv.platform].spec;
        let offset = spec.clock_offset();
        TraceRecord {
            run_id: self.run_id.clone(),
            platform: spec.id.clone(),
            function: inv.function.clone(),
            context: inv.context,
            start: start + offset,
            end: end + offset,
            body,
        }
    }

    fn emit_platform(&mut self, p: usize, record: &TraceRecord) {
        let now = self.now;
        self.platforms[p].sink.emit(record, now).expect("simulator records are well-formed");
    }

    pub fn dropped(&self) -> BTreeMap<String, u64> {
        self.platforms.iter().map(|p| (p.spec.id.clone(), p.sink.dropped())).collect()
    }

    pub fn finish(mut self) -> SimOutput {
        self.run_until_idle();
        let mut truth = std::mem::take(&mut self.truth);
        truth.dropped = self.dropped();
        let run_id = self.run_id.clone();
        let platform_logs = self
            .platforms
            .into_iter()
            .map(|p| {
                let dropped = p.sink.dropped();
                let mut lines = p.sink.into_lines();
                lines.push(dropped_line(&run_id, &p.spec.id, dropped));
                (p.spec.id, lines)
            })
            .collect();
        SimOutput { run_id, platform_logs, loadgen_log: self.loadgen.into_lines(), truth }
    }

    pub fn truth(&self) -> &GroundTruth {
        &self.truth
    }

    pub fn store_value(&self, service: &str, key: &str) -> Option<u64> {
        self.stores.get(service)?.get(key).copied()
    }
}
