use std::collections::BTreeMap;

use faasbench::analyze::{
    analyze, build_trees, coldstart_report, decompose, estimate_skew_corrected_network, parse_logs, summarize,
    trigger_metrics, EdgeKind, ParsedLog,
};
use faasbench::app::{load_builtin, ApplicationSpec};
use faasbench::deploy::{compile, DeploymentConfig};
use faasbench::dist::Dist;
use faasbench::loadgen::{execute, schedule, LoadProfile, Phase, Stream, Workflow, WorkflowStep};
use faasbench::sim::{GroundTruth, PlatformSpec, Simulation};
use faasbench::time::ms;
use faasbench::trace::{header_line, RecordKind, LOADGEN_PLATFORM};
use proptest::prelude::*;

fn simulate(
    app: &ApplicationSpec,
    cfg: &DeploymentConfig,
    profile: &LoadProfile,
    seed: u64,
) -> (ParsedLog, GroundTruth) {
    let plan = compile(app, cfg).unwrap();
    let mut sim = Simulation::from_plan("t", &plan, seed).unwrap();
    execute(&schedule(profile, seed), profile, &mut sim).unwrap();
    let out = sim.finish();
    let mut lines = vec![header_line()];
    lines.extend(profile.windows().iter().map(|w| w.to_line("t")));
    lines.extend(out.loadgen_log);
    lines.extend(out.platform_logs.into_values().flatten());
    (parse_logs(lines.iter().map(String::as_str)).unwrap(), out.truth)
}

fn every(workflow: &str, entry: &str, interval_s: f64, duration_s: f64) -> LoadProfile {
    LoadProfile {
        workflows: vec![Workflow {
            name: workflow.into(),
            steps: vec![WorkflowStep { entry: entry.into(), route: None, payload_bytes: 0, think_ms: 0.0 }],
        }],
        phases: vec![Phase::Periodic {
            name: "p".into(),
            duration_s,
            streams: vec![Stream { workflow: workflow.into(), interval_s }],
        }],
        scale: 1.0,
        scale_mode: Default::default(),
    }
}

fn chain_app() -> ApplicationSpec {
    ApplicationSpec::from_json(
        r#"{"name": "chain", "functions": [
            {"name": "f", "trigger": "http-sync", "entry_point": true,
             "body": [{"kind": "compute", "time": "constant(2)"}, {"kind": "call", "target": "g"}]},
            {"name": "g", "trigger": "http-sync",
             "body": [{"kind": "compute", "time": "lognormal(5, 0.4)"}, {"kind": "db_get", "key": "k", "service": "store"}]}],
          "external_services": ["store"]}"#,
    )
    .unwrap()
}

fn one_platform(app: &ApplicationSpec, net: Dist, db: Dist) -> DeploymentConfig {
    let p = PlatformSpec::new("a").with_link("a", net.clone()).with_link(LOADGEN_PLATFORM, net);
    DeploymentConfig::single_platform(app, p, db)
}

#[test]
fn chain_recovers_configured_legs() {
    let app = chain_app();
    let cfg = one_platform(&app, Dist::Constant(15.0), Dist::Constant(3.0));
    let (log, _) = simulate(&app, &cfg, &every("w", "f", 1.0, 20.0), 1);
    for tree in build_trees(&log.records) {
        let b = decompose(&tree).unwrap();
        for e in &b.edges {
            match e.kind {
                EdgeKind::Root | EdgeKind::Sync => assert_eq!(e.cost, Some(ms(30.0))),
                EdgeKind::Db => assert_eq!(e.cost, Some(ms(3.0))),
                other => panic!("unexpected {other:?}"),
            }
        }
        for est in estimate_skew_corrected_network(&tree) {
            assert_eq!(est.one_way_us, 15_000.0);
        }
    }
}

#[test]
fn webshop_cart_chain_matches_truth() {
    let app = load_builtin("webshop").unwrap();
    let cfg = one_platform(&app, Dist::lognormal(15.0, 0.3), Dist::lognormal(3.0, 0.3));
    let mut profile = every("cart", "frontend", 1.0, 5.0);
    profile.workflows[0].steps[0].route = Some("addToCart".into());
    let (log, truth) = simulate(&app, &cfg, &profile, 2);
    let trees = build_trees(&log.records);
    assert_eq!(trees.len(), 5);
    for tree in &trees {
        let mut got: Vec<_> = tree.links().into_iter().map(|(p, parent, f, ..)| (p, parent, f)).collect();
        let mut want: Vec<_> = truth
            .invocations
            .iter()
            .filter(|i| i.context == tree.context)
            .map(|i| (i.pair, i.parent, i.function.clone()))
            .collect();
        got.sort();
        want.sort();
        assert_eq!(got, want);
        let functions: Vec<_> = tree.nodes.iter().map(|n| n.invocation.function.as_str()).collect();
        assert!(functions.contains(&"addCartItem"));
        let db_calls: usize = tree.nodes.iter().map(|n| n.db.len()).sum();
        assert!(db_calls >= 2);
    }
}

#[test]
fn constant_trigger_delay_everywhere() {
    let app = load_builtin("smartfactory").unwrap();
    let mut p = PlatformSpec::new("a").with_link(LOADGEN_PLATFORM, Dist::Constant(5.0));
    p.trigger_delay = Dist::Constant(100.0);
    let cfg = DeploymentConfig::single_platform(&app, p, Dist::Constant(1.0));
    let (log, _) = simulate(&app, &cfg, &every("o", "orderSupplies", 5.0, 60.0), 3);
    let samples = trigger_metrics(&build_trees(&log.records));
    assert_eq!(samples.len(), 12 * 16);
    assert!(samples.iter().all(|s| s.trigger_delay == Some(ms(100.0))));
}

#[test]
fn sync_only_app_has_no_trigger_samples() {
    let app = load_builtin("webshop").unwrap();
    let cfg = one_platform(&app, Dist::Constant(1.0), Dist::Constant(1.0));
    let mut profile = every("home", "frontend", 1.0, 5.0);
    profile.workflows[0].steps[0].route = Some("home".into());
    let (log, _) = simulate(&app, &cfg, &profile, 4);
    assert!(trigger_metrics(&build_trees(&log.records)).is_empty());
}

#[test]
fn sequential_client_never_cold_after_first() {
    let app = chain_app();
    let mut cfg = one_platform(&app, Dist::Constant(1.0), Dist::Constant(1.0));
    cfg.platforms[0].cold_start = Dist::Constant(400.0);
    let (log, _) = simulate(&app, &cfg, &every("w", "f", 2.0, 120.0), 5);
    let r = coldstart_report(&log.records, &log.phases, None);
    // one executor per function
    assert_eq!(r.total_cold(), 2);
    assert_eq!(r.flag_mismatches, 0);
}

#[test]
fn cold_minus_warm_is_the_configured_delay() {
    let app = chain_app();
    let mut cfg = one_platform(&app, Dist::Constant(1.0), Dist::Constant(1.0));
    cfg.platforms[0].cold_start = Dist::Constant(400.0);
    cfg.compute_override = Some(Dist::Constant(2.0));
    let (log, _) = simulate(&app, &cfg, &every("w", "f", 2.0, 30.0), 6);
    let r = coldstart_report(&log.records, &log.phases, Some("g"));
    assert_eq!(r.cold_exec.p50.unwrap() - r.warm_exec.p50.unwrap(), ms(400.0));
}

#[test]
fn asymmetric_legs_give_their_mean() {
    let app = ApplicationSpec::from_json(
        r#"{"name": "x", "functions": [
            {"name": "f", "trigger": "http-sync", "entry_point": true, "body": [{"kind": "call", "target": "g"}]},
            {"name": "g", "trigger": "http-sync", "body": [{"kind": "compute", "time": "constant(1)"}]}]}"#,
    )
    .unwrap();
    let a =
        PlatformSpec::new("a").with_link("b", Dist::Constant(10.0)).with_link(LOADGEN_PLATFORM, Dist::Constant(1.0));
    let b = PlatformSpec::new("b").with_link("a", Dist::Constant(20.0));
    let cfg = DeploymentConfig {
        platforms: vec![a, b],
        assignment: BTreeMap::from([("f".into(), "a".into()), ("g".into(), "b".into())]),
        services: BTreeMap::new(),
        compute_override: None,
        tracing_overhead_bytes: 64,
    };
    let mut skewed = cfg.clone();
    skewed.platforms[0].clock_offset_ms = 50.0;
    for cfg in [cfg, skewed] {
        let (log, _) = simulate(&app, &cfg, &every("w", "f", 1.0, 3.0), 7);
        for tree in build_trees(&log.records) {
            let est = estimate_skew_corrected_network(&tree);
            let call = est.iter().find(|e| e.to_function == "g").unwrap();
            assert_eq!(call.one_way_us, 15_000.0);
            // each real leg is off by 5 ms
            assert_eq!((call.one_way_us - 10_000.0).abs(), 5_000.0);
        }
    }
}

#[test]
fn lognormal_exec_median() {
    let app = ApplicationSpec::from_json(
        r#"{"name": "x", "functions": [{"name": "f", "trigger": "http-sync", "entry_point": true,
            "body": [{"kind": "compute", "time": "lognormal(8, 0.5)"}]}]}"#,
    )
    .unwrap();
    let cfg = one_platform(&app, Dist::Constant(1.0), Dist::Constant(1.0));
    let (log, _) = simulate(&app, &cfg, &every("w", "f", 0.05, 60.0), 8);
    let exec: Vec<_> =
        log.records.iter().filter(|r| r.kind() == RecordKind::Invocation).map(|r| r.duration()).collect();
    assert!(exec.len() >= 1000);
    let p50 = summarize(&exec).p50.unwrap() as f64;
    assert!((p50 / 8_000.0 - 1.0).abs() < 0.1, "{p50}");
}

#[test]
fn truncated_log_is_partial() {
    let app = chain_app();
    let cfg = one_platform(&app, Dist::Constant(1.0), Dist::Constant(1.0));
    let (log, _) = simulate(&app, &cfg, &every("w", "f", 1.0, 10.0), 9);
    let mut lines: Vec<String> =
        std::iter::once(header_line()).chain(log.records.iter().map(|r| r.to_line())).collect();
    let last = lines.pop().unwrap();
    lines.push(last[..last.len() / 2].to_string());
    let parsed = parse_logs(lines.iter().map(String::as_str)).unwrap();
    assert_eq!(parsed.report.parse_errors, 1);
    assert_eq!(parsed.records.len(), log.records.len() - 1);
    let a = analyze(&parsed);
    assert_eq!(a.incomplete, 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    // Every record lands in one tree, whatever is lost.
    #[test]
    fn trees_partition_records(seed in 0u64..1000, keep in 0.3f64..1.0) {
        let app = load_builtin("smartfactory").unwrap();
        let cfg = one_platform(&app, Dist::lognormal(10.0, 0.3), Dist::Constant(2.0));
        let (log, _) = simulate(&app, &cfg, &every("o", "orderSupplies", 5.0, 30.0), seed);
        let n = log.records.len();
        let kept: Vec<_> = log.records.into_iter().enumerate()
            .filter(|(i, _)| ((*i as u64).wrapping_mul(2654435761).wrapping_add(seed) % 1000) as f64 / 1000.0 < keep)
            .map(|(_, r)| r)
            .collect();
        prop_assume!(kept.len() < n || keep > 0.99);
        let trees = build_trees(&kept);
        prop_assert_eq!(trees.iter().map(|t| t.record_count()).sum::<usize>(), kept.len());
        for t in &trees {
            prop_assert_eq!(decompose(t).is_ok(), t.complete);
        }
    }

    // Sampled distributions: each tree still conserves its realized samples,
    // and no component is negative.
    #[test]
    fn conservation_with_sampling(seed in 0u64..1000) {
        let app = load_builtin("webshop").unwrap();
        let cfg = one_platform(&app, Dist::lognormal(15.0, 0.4), Dist::lognormal(3.0, 0.4));
        let profile = faasbench::loadgen::builtin_profile("webshop").unwrap().with_scale(0.003);
        let (log, truth) = simulate(&app, &cfg, &profile, seed);
        let realized: BTreeMap<_, _> = truth.roots.iter().map(|r| (r.pair, r.realized)).collect();
        for tree in build_trees(&log.records) {
            let b = decompose(&tree).unwrap();
            for r in &b.roots {
                prop_assert_eq!(r.components.total(), r.round_trip);
                let t = realized[&r.pair];
                prop_assert_eq!((r.components.compute, r.components.network, r.components.db), (t.compute, t.network, t.db));
                prop_assert!(r.components.compute >= 0 && r.components.network >= 0 && r.components.db >= 0);
            }
            prop_assert!(b.nodes.iter().all(|n| n.compute >= 0));
        }
    }
}
