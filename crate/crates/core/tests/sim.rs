use std::collections::{BTreeMap, BTreeSet};

use faasbench::app::ApplicationSpec;
use faasbench::deploy::{compile, DeploymentConfig, DeploymentPlan, Endpoint, ServiceBinding};
use faasbench::dist::Dist;
use faasbench::sim::{PlatformSpec, Simulation};
use faasbench::time::{ms, Micros};
use faasbench::trace::{CallMode, ContextId, DbOp, RecordBody, TraceRecord};
use faasbench::Error;
use proptest::prelude::*;

fn app(json: &str) -> ApplicationSpec {
    ApplicationSpec::from_json(json).unwrap()
}

fn one_function(compute_ms: f64) -> ApplicationSpec {
    app(&format!(
        r#"{{"name": "one", "functions": [
            {{"name": "f", "trigger": "http-sync", "entry_point": true,
              "body": [{{"kind": "compute", "time": "constant({compute_ms})"}}]}}]}}"#
    ))
}

fn caller_callee() -> ApplicationSpec {
    app(r#"{"name": "pair", "functions": [
        {"name": "a", "trigger": "http-sync", "entry_point": true,
         "body": [{"kind": "compute", "time": "constant(1)"}, {"kind": "call", "target": "b"}]},
        {"name": "b", "trigger": "http-sync", "body": [{"kind": "compute", "time": "constant(2)"}]}]}"#)
}

fn publisher_app() -> ApplicationSpec {
    app(r#"{"name": "events", "functions": [
        {"name": "src", "trigger": "http-sync", "entry_point": true,
         "body": [{"kind": "compute", "time": "constant(1)"}, {"kind": "publish", "target": "ev"}]},
        {"name": "ev", "trigger": "event-async", "body": [{"kind": "compute", "time": "constant(2)"}]}]}"#)
}

fn platform(id: &str) -> PlatformSpec {
    PlatformSpec::new(id).with_link("loadgen", Dist::Constant(5.0))
}

fn plan(app: &ApplicationSpec, platforms: Vec<PlatformSpec>, assign: &[(&str, &str)]) -> DeploymentPlan {
    let cfg = DeploymentConfig {
        platforms,
        assignment: assign.iter().map(|(f, p)| (f.to_string(), p.to_string())).collect(),
        services: BTreeMap::new(),
        compute_override: None,
        tracing_overhead_bytes: 64,
    };
    compile(app, &cfg).unwrap()
}

fn parse(lines: &[String]) -> Vec<TraceRecord> {
    lines.iter().filter(|l| !l.starts_with('#')).map(|l| l.parse().unwrap()).collect()
}

#[test]
fn cold_then_warm_then_expired() {
    let mut p = platform("a");
    p.cold_start = Dist::Constant(400.0);
    p.keep_alive_ms = 1_000.0;
    let plan = plan(&one_function(2.0), vec![p], &[("f", "a")]);
    let mut sim = Simulation::from_plan("r", &plan, 1).unwrap();

    let first = sim.invoke("f", ContextId(1), sim_pair(1), 0).unwrap();
    sim.run_until_idle();
    let o1 = sim.outcome(first).unwrap();
    assert!(o1.cold_start);
    assert_eq!(o1.start, 0);
    assert_eq!(o1.body_start, ms(400.0));
    assert_eq!(o1.end, o1.body_start + ms(2.0));

    let second = sim.invoke("f", ContextId(2), sim_pair(2), o1.end).unwrap();
    sim.run_until_idle();
    let o2 = sim.outcome(second).unwrap();
    assert!(!o2.cold_start);
    assert_eq!(o2.start, o1.end);
    assert_eq!(o2.body_start, o2.start);
    assert_eq!(o2.executor, o1.executor);

    // idle exactly keep-alive: still warm
    let third = sim.invoke("f", ContextId(3), sim_pair(3), o2.end + ms(1_000.0)).unwrap();
    sim.run_until_idle();
    let o3 = sim.outcome(third).unwrap();
    assert!(!o3.cold_start);

    let fourth = sim.invoke("f", ContextId(4), sim_pair(4), o3.end + ms(1_000.0) + 1).unwrap();
    sim.run_until_idle();
    let o4 = sim.outcome(fourth).unwrap();
    assert!(o4.cold_start);
    assert_ne!(o4.executor, o1.executor);
}

fn sim_pair(n: u128) -> faasbench::trace::PairId {
    faasbench::trace::PairId(n)
}

#[test]
fn concurrent_arrivals_get_separate_executors() {
    let plan = plan(&one_function(10.0), vec![platform("a")], &[("f", "a")]);
    let mut sim = Simulation::from_plan("r", &plan, 1).unwrap();
    let a = sim.invoke("f", ContextId(1), sim_pair(1), 0).unwrap();
    let b = sim.invoke("f", ContextId(2), sim_pair(2), ms(5.0)).unwrap();
    sim.run_until_idle();
    let (a, b) = (sim.outcome(a).unwrap(), sim.outcome(b).unwrap());
    assert!(a.cold_start && b.cold_start);
    assert_ne!(a.executor, b.executor);
}

#[test]
fn invoke_unknown_function() {
    let plan = plan(&one_function(1.0), vec![platform("a")], &[("f", "a")]);
    let mut sim = Simulation::from_plan("r", &plan, 1).unwrap();
    assert!(matches!(sim.invoke("g", ContextId(1), sim_pair(1), 0), Err(Error::NotDeployed(_))));
}

#[test]
fn same_platform_round_trip() {
    let plan = plan(&caller_callee(), vec![platform("a")], &[("a", "a"), ("b", "a")]);
    let mut sim = Simulation::from_plan("r", &plan, 1).unwrap();
    let call = sim.remote_call("a", &Endpoint::new("a", "b"), CallMode::Sync, ms(10.0), ContextId(1)).unwrap();
    sim.run_until_idle();
    let o = sim.call_outcome(call).unwrap();
    assert_eq!(o.completed - o.sent, ms(2.0));
}

#[test]
fn cross_platform_round_trip() {
    let a = platform("a").with_link("b", Dist::Constant(15.0));
    let plan = plan(&caller_callee(), vec![a, platform("b")], &[("a", "a"), ("b", "b")]);
    let mut sim = Simulation::from_plan("r", &plan, 1).unwrap();
    let call = sim.remote_call("a", &Endpoint::new("b", "b"), CallMode::Sync, 0, ContextId(1)).unwrap();
    sim.run_until_idle();
    assert_eq!(sim.call_outcome(call).unwrap().completed, ms(32.0));
}

#[test]
fn async_accept_after_out_leg() {
    let a = platform("a").with_link("b", Dist::Constant(25.0));
    let plan = plan(&publisher_app(), vec![a, platform("b")], &[("src", "a"), ("ev", "b")]);
    let mut sim = Simulation::from_plan("r", &plan, 1).unwrap();
    let publisher = Endpoint::new("b", "publisher@b");
    let call = sim.remote_call("a", &publisher, CallMode::Async, ms(3.0), ContextId(1)).unwrap();
    assert_eq!(sim.call_outcome(call).unwrap().completed, ms(28.0));
}

#[test]
fn unknown_endpoint() {
    let plan = plan(&caller_callee(), vec![platform("a")], &[("a", "a"), ("b", "a")]);
    let mut sim = Simulation::from_plan("r", &plan, 1).unwrap();
    let err = sim.remote_call("a", &Endpoint::new("a", "zzz"), CallMode::Sync, 0, ContextId(1));
    assert!(matches!(err, Err(Error::UnknownEndpoint(_))));
}

fn trigger_gaps(delay: Dist, n: usize) -> Vec<Micros> {
    let mut p = platform("a");
    p.trigger_delay = delay;
    let plan = plan(&publisher_app(), vec![p], &[("src", "a"), ("ev", "a")]);
    let mut sim = Simulation::from_plan("r", &plan, 3).unwrap();
    let publishers: Vec<_> =
        (0..n).map(|i| sim.publish("a", "ev", ms(i as f64 * 1_000.0), ContextId(i as u128)).unwrap()).collect();
    sim.run_until_idle();
    publishers
        .into_iter()
        .map(|p| {
            let publisher = sim.outcome(p).unwrap();
            let children = sim.children(p);
            assert_eq!(children.len(), 1);
            let triggered = sim.outcome(children[0]).unwrap();
            assert_eq!(triggered.function, "ev");
            triggered.start - publisher.start
        })
        .collect()
}

#[test]
fn constant_trigger_delay() {
    assert!(trigger_gaps(Dist::Constant(100.0), 20).iter().all(|&g| g == ms(100.0)));
}

fn median(mut v: Vec<Micros>) -> f64 {
    v.sort_unstable();
    let rank = v.len().div_ceil(2);
    v[rank - 1] as f64
}

#[test]
fn sampled_trigger_delay_median() {
    let gaps = trigger_gaps(Dist::lognormal(100.0, 0.5), 1000);
    let m = median(gaps);
    assert!((m - 100_000.0).abs() <= 10_000.0, "median {m}");
}

#[test]
fn publish_to_sync_function() {
    let plan = plan(&publisher_app(), vec![platform("a")], &[("src", "a"), ("ev", "a")]);
    let mut sim = Simulation::from_plan("r", &plan, 1).unwrap();
    assert!(matches!(sim.publish("a", "src", 0, ContextId(1)), Err(Error::NotAsync(f)) if f == "src"));
}

fn store_plan(latency: Dist) -> DeploymentPlan {
    let app = app(r#"{"name": "db", "external_services": ["store"], "functions": [
        {"name": "f", "trigger": "http-sync", "entry_point": true,
         "body": [{"kind": "db_set", "key": "k", "value_size": 10}]}]}"#);
    let cfg = DeploymentConfig {
        platforms: vec![platform("a")],
        assignment: BTreeMap::from([("f".into(), "a".into())]),
        services: BTreeMap::from([(
            "store".into(),
            ServiceBinding { host: "a".into(), op_latency: latency, from: BTreeMap::new() },
        )]),
        compute_override: None,
        tracing_overhead_bytes: 64,
    };
    compile(&app, &cfg).unwrap()
}

#[test]
fn db_reply_and_state() {
    let plan = store_plan(Dist::Constant(3.0));
    let mut sim = Simulation::from_plan("r", &plan, 1).unwrap();
    assert_eq!(sim.db_op(DbOp::Get, "store", "x", 0, "a", 0).unwrap(), (ms(3.0), 0));
    sim.db_op(DbOp::Set, "store", "x", 77, "a", ms(5.0)).unwrap();
    assert_eq!(sim.db_op(DbOp::Get, "store", "x", 0, "a", ms(10.0)).unwrap(), (ms(13.0), 77));
    assert!(matches!(sim.db_op(DbOp::Get, "redis", "x", 0, "a", 0), Err(Error::NoServiceBinding(_))));
}

#[test]
fn db_latency_median() {
    let plan = store_plan(Dist::lognormal(3.0, 0.4));
    let mut sim = Simulation::from_plan("r", &plan, 9).unwrap();
    let samples: Vec<Micros> =
        (0..1000).map(|i| sim.db_op(DbOp::Get, "store", "k", 0, "a", i).unwrap().0 - i).collect();
    let m = median(samples);
    assert!((m - 3_000.0).abs() <= 300.0, "median {m}");
}

#[test]
fn db_step_sets_value() {
    let plan = store_plan(Dist::Constant(3.0));
    let mut sim = Simulation::from_plan("r", &plan, 1).unwrap();
    let inv = sim.invoke("f", ContextId(1), sim_pair(1), 0).unwrap();
    sim.run_until_idle();
    assert_eq!(sim.outcome(inv).unwrap().end, ms(3.0));
    assert_eq!(sim.store_value("store", "k"), Some(10));
}

fn rate_limited_run(limit: Option<u32>) -> (usize, u64) {
    let mut p = platform("a");
    p.log_rate_limit = limit;
    let plan = plan(&one_function(0.0), vec![p], &[("f", "a")]);
    let mut sim = Simulation::from_plan("r", &plan, 1).unwrap();
    // 15000 invocations over 30 s, one record each
    for i in 0..15_000u128 {
        sim.invoke("f", ContextId(i), sim_pair(i), (i as i64) * 2_000).unwrap();
    }
    let out = sim.finish();
    let lines = &out.platform_logs["a"];
    (parse(lines).len(), out.truth.dropped["a"])
}

#[test]
fn log_rate_limit_drops_excess() {
    let (kept, dropped) = rate_limited_run(Some(250));
    assert_eq!(kept, 7_500);
    assert_eq!(dropped, 7_500);
    assert_eq!(rate_limited_run(None), (15_000, 0));
}

#[test]
fn drop_line_is_appended() {
    let plan = plan(&one_function(1.0), vec![platform("a")], &[("f", "a")]);
    let sim = Simulation::from_plan("run-x", &plan, 1).unwrap();
    let out = sim.finish();
    assert_eq!(out.platform_logs["a"].last().unwrap(), "#dropped\trun-x\ta\t0");
}

#[test]
fn clock_offset_shifts_logged_times_only() {
    let base = |offset: f64| {
        let mut p = platform("a");
        p.clock_offset_ms = offset;
        let plan = plan(&one_function(2.0), vec![p], &[("f", "a")]);
        let mut sim = Simulation::from_plan("r", &plan, 1).unwrap();
        sim.invoke("f", ContextId(1), sim_pair(1), ms(1.0)).unwrap();
        parse(&sim.finish().platform_logs["a"])
    };
    let plain = base(0.0);
    let skewed = base(50.0);
    assert_eq!(skewed[0].start - plain[0].start, ms(50.0));
    assert_eq!(skewed[0].duration(), plain[0].duration());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    // Executors serve one request at a time, and a record is cold exactly
    // when its executor key shows up for the first time.
    #[test]
    fn executor_reuse_and_cold_flags(gaps in proptest::collection::vec(0i64..40_000, 1..60), seed in 0u64..1000) {
        let mut p = platform("a");
        p.cold_start = Dist::Uniform(0.0, 5.0);
        p.keep_alive_ms = 20.0;
        let plan = plan(&one_function(10.0), vec![p], &[("f", "a")]);
        let mut sim = Simulation::from_plan("r", &plan, seed).unwrap();
        let mut t = 0;
        for (i, g) in gaps.iter().enumerate() {
            t += g;
            sim.invoke("f", ContextId(i as u128), sim_pair(i as u128), t).unwrap();
        }
        let mut records = parse(&sim.finish().platform_logs["a"]);
        records.sort_by_key(|r| r.start);
        let mut seen = BTreeSet::new();
        let mut last_end: BTreeMap<_, Micros> = BTreeMap::new();
        for r in &records {
            let RecordBody::Invocation { executor, cold_start, .. } = r.body else { unreachable!() };
            prop_assert_eq!(cold_start, seen.insert(executor));
            if let Some(end) = last_end.get(&executor) {
                prop_assert!(*end <= r.start);
            }
            last_end.insert(executor, r.end);
        }
    }
}
