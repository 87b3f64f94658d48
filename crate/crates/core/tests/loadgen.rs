use std::collections::BTreeSet;

use faasbench::app::{load_builtin, ApplicationSpec};
use faasbench::deploy::{compile, DeploymentConfig};
use faasbench::dist::Dist;
use faasbench::loadgen::{
    builtin_profile, execute, schedule, LoadProfile, Phase, ScaleMode, Stream, Weighted, Workflow, WorkflowStep,
};
use faasbench::sim::{PlatformSpec, Simulation};
use faasbench::time::secs;
use faasbench::trace::TraceRecord;
use faasbench::Error;
use proptest::prelude::*;

fn steady(rate: f64, duration_s: f64) -> LoadProfile {
    LoadProfile {
        workflows: vec![Workflow {
            name: "w".into(),
            steps: vec![WorkflowStep { entry: "f".into(), route: None, payload_bytes: 0, think_ms: 0.0 }],
        }],
        phases: vec![Phase::ConstantRate {
            name: "c".into(),
            rate,
            duration_s,
            mix: vec![Weighted { workflow: "w".into(), weight: 1.0 }],
        }],
        scale: 1.0,
        scale_mode: ScaleMode::Durations,
    }
}

#[test]
fn poisson_count_within_three_percent() {
    let profile = steady(20.0, 900.0);
    for seed in 0..8 {
        let n = schedule(&profile, seed).len() as f64;
        assert!((n - 18_000.0).abs() <= 540.0, "seed {seed}: {n}");
    }
}

#[test]
fn scale_halves_counts() {
    for mode in [ScaleMode::Durations, ScaleMode::Rates] {
        let mut full = steady(20.0, 900.0);
        full.scale_mode = mode;
        let half = full.clone().with_scale(0.5);
        let a = schedule(&full, 3).len() as f64;
        let b = schedule(&half, 3).len() as f64;
        assert!((b / a - 0.5).abs() < 0.03, "{mode:?}: {a} vs {b}");
    }
}

#[test]
fn periodic_is_exact() {
    let mut p = steady(1.0, 1.0);
    p.phases = vec![Phase::Periodic {
        name: "p".into(),
        duration_s: 60.0,
        streams: vec![Stream { workflow: "w".into(), interval_s: 2.0 }],
    }];
    let times: Vec<_> = schedule(&p, 0).iter().map(|a| a.at).collect();
    let expected: Vec<_> = (1..=30).map(|k| secs(2.0 * k as f64)).collect();
    assert_eq!(times, expected);
}

#[test]
fn pause_is_silent_and_bursts_are_even() {
    let mut p = steady(50.0, 10.0);
    p.phases.push(Phase::Pause { name: "quiet".into(), duration_s: 30.0 });
    p.phases.push(Phase::Burst {
        name: "b".into(),
        total: 10,
        duration_s: 5.0,
        mix: vec![Weighted { workflow: "w".into(), weight: 1.0 }],
    });
    let windows = p.windows();
    let arrivals = schedule(&p, 4);
    assert!(arrivals.iter().all(|a| a.at < windows[1].start || a.at >= windows[1].end));
    let burst: Vec<_> = arrivals.iter().filter(|a| a.phase == 2).map(|a| a.at).collect();
    let expected: Vec<_> = (0..10).map(|i| secs(40.0) + secs(0.5 * i as f64)).collect();
    assert_eq!(burst, expected);
}

#[test]
fn mix_follows_weights() {
    let mut p = builtin_profile("webshop").unwrap();
    p.scale = 0.2;
    let arrivals = schedule(&p, 1);
    let browse = arrivals.iter().filter(|a| a.workflow == "browse").count() as f64;
    let share = browse / arrivals.len() as f64;
    assert!((share - 0.25).abs() < 0.02, "{share}");
}

#[test]
fn invalid_profiles() {
    let mut p = steady(1.0, 1.0);
    if let Phase::ConstantRate { mix, .. } = &mut p.phases[0] {
        mix[0].weight = 0.7;
    }
    assert!(p.validate(None).is_err());
    let mut p = steady(1.0, 1.0);
    p.phases = vec![Phase::Periodic {
        name: "p".into(),
        duration_s: 1.0,
        streams: vec![Stream { workflow: "w".into(), interval_s: 0.0 }],
    }];
    assert!(p.validate(None).is_err());
    let p = steady(1.0, 0.0);
    assert!(p.validate(None).is_err());
}

#[test]
fn workflows_must_target_entry_points() {
    let app = load_builtin("webshop").unwrap();
    let mut p = steady(1.0, 1.0);
    p.workflows[0].steps[0].entry = "getCart".into();
    assert!(p.validate(Some(&app)).is_err());
}

fn one_function_sim(seed: u64, latency_ms: f64) -> Simulation {
    let app = ApplicationSpec::from_json(
        r#"{"name": "one", "functions": [{"name": "f", "trigger": "http-sync", "entry_point": true,
            "body": [{"kind": "compute", "time": "constant(2)"}]}]}"#,
    )
    .unwrap();
    let platform = PlatformSpec::new("a").with_link("loadgen", Dist::Constant(latency_ms));
    let plan = compile(&app, &DeploymentConfig::single_platform(&app, platform, Dist::Constant(1.0))).unwrap();
    Simulation::from_plan("r", &plan, seed).unwrap()
}

fn records(lines: &[String]) -> Vec<TraceRecord> {
    lines.iter().filter(|l| !l.starts_with('#')).map(|l| l.parse().unwrap()).collect()
}

#[test]
fn one_workflow_one_root_record() {
    let profile = steady(1.0, 1.0);
    let arrivals = vec![faasbench::loadgen::Arrival { at: 0, workflow: "w".into(), phase: 0 }];
    let mut sim = one_function_sim(1, 5.0);
    let launched = execute(&arrivals, &profile, &mut sim).unwrap();
    let out = sim.finish();
    let roots = records(&out.loadgen_log);
    assert_eq!(roots.len(), 1);
    assert_eq!(roots[0].function, "w");
    assert_eq!(roots[0].duration(), faasbench::time::ms(12.0));
    let downstream = records(&out.platform_logs["a"]);
    assert!(downstream.iter().all(|r| r.context == launched[0].context));
}

#[test]
fn contexts_are_fresh() {
    let profile = steady(200.0, 5.0);
    let arrivals = schedule(&profile, 2);
    let mut sim = one_function_sim(2, 5.0);
    let launched = execute(&arrivals, &profile, &mut sim).unwrap();
    let contexts: BTreeSet<_> = launched.iter().map(|l| l.context).collect();
    assert_eq!(contexts.len(), arrivals.len());
}

#[test]
fn unknown_entry_is_unknown_endpoint() {
    let mut profile = steady(1.0, 1.0);
    profile.workflows[0].steps[0].entry = "g".into();
    let arrivals = vec![faasbench::loadgen::Arrival { at: 0, workflow: "w".into(), phase: 0 }];
    let mut sim = one_function_sim(1, 5.0);
    assert!(matches!(execute(&arrivals, &profile, &mut sim), Err(Error::UnknownEndpoint(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    // Send times do not depend on how fast the system answers.
    #[test]
    fn open_loop(seed in 0u64..500, slow in 1.0f64..500.0) {
        let profile = steady(50.0, 2.0);
        let arrivals = schedule(&profile, seed);
        let sent = |latency: f64| {
            let mut sim = one_function_sim(seed, latency);
            execute(&arrivals, &profile, &mut sim).unwrap();
            let mut starts: Vec<_> = records(&sim.finish().loadgen_log).iter().map(|r| r.start).collect();
            starts.sort_unstable();
            starts
        };
        prop_assert_eq!(sent(1.0), sent(slow));
    }

    #[test]
    fn schedule_is_deterministic(seed in 0u64..10_000) {
        let p = builtin_profile("streaming").unwrap().with_scale(0.05);
        prop_assert_eq!(schedule(&p, seed), schedule(&p, seed));
    }
}
