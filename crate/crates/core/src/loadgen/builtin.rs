//! Default load profiles of the built-in benchmarks.
//!
//! Workflow step sequences are conventions; rates, intervals and phase
//! lengths follow the scenario descriptions.

use super::{LoadProfile, Phase, ScaleMode, Stream, Weighted, Workflow, WorkflowStep};
use crate::error::Error;

pub const STREAMING_REGISTRATIONS: u64 = 50;

fn step(entry: &str, route: Option<&str>, think_ms: f64) -> WorkflowStep {
    WorkflowStep { entry: entry.into(), route: route.map(Into::into), payload_bytes: 256, think_ms }
}

fn workflow(name: &str, steps: Vec<WorkflowStep>) -> Workflow {
    Workflow { name: name.into(), steps }
}

fn mix(parts: &[(&str, f64)]) -> Vec<Weighted> {
    parts.iter().map(|(w, weight)| Weighted { workflow: w.to_string(), weight: *weight }).collect()
}

fn profile(workflows: Vec<Workflow>, phases: Vec<Phase>) -> LoadProfile {
    LoadProfile { workflows, phases, scale: 1.0, scale_mode: ScaleMode::Durations }
}

pub fn builtin_profile(benchmark: &str) -> Result<LoadProfile, Error> {
    match benchmark {
        "webshop" => Ok(webshop()),
        "smartcity" => Ok(smartcity(20.0)),
        "smartfactory" => Ok(smartfactory()),
        "streaming" => Ok(streaming()),
        other => Err(Error::UnknownBenchmark(other.to_string())),
    }
}

fn shop(route: &str) -> WorkflowStep {
    step("frontend", Some(route), 1_000.0)
}

/// Four customer workflows at 20 per second for 15 minutes.
fn webshop() -> LoadProfile {
    profile(
        vec![
            workflow("browse", vec![shop("home"), shop("product"), shop("product"), shop("search")]),
            workflow("browseAndCart", vec![shop("home"), shop("product"), shop("addToCart"), shop("cart")]),
            workflow(
                "cartAndCheckout",
                vec![shop("home"), shop("product"), shop("addToCart"), shop("cart"), shop("login"), shop("checkout")],
            ),
            workflow("currencyAndBrowse", vec![shop("setCurrency"), shop("home"), shop("product")]),
        ],
        vec![Phase::ConstantRate {
            name: "constant".into(),
            rate: 20.0,
            duration_s: 900.0,
            mix: mix(&[
                ("browse", 0.25),
                ("browseAndCart", 0.25),
                ("cartAndCheckout", 0.25),
                ("currencyAndBrowse", 0.25),
            ]),
        }],
    )
}

/// Sensor streams for 15 minutes, with a five-second emergency every two minutes.
pub(crate) fn smartcity(weather_interval_s: f64) -> LoadProfile {
    profile(
        vec![
            workflow("traffic", vec![step("trafficSensorFilter", None, 0.0)]),
            workflow("image", vec![step("objectRecognition", None, 0.0)]),
            workflow("weather", vec![step("weatherSensorFilter", None, 0.0)]),
            // one frame per second while the emergency lasts
            workflow("emergency", (0..5).map(|_| step("objectRecognition", None, 1_000.0)).collect()),
        ],
        vec![Phase::Periodic {
            name: "sensors".into(),
            duration_s: 900.0,
            streams: vec![
                Stream { workflow: "traffic".into(), interval_s: 2.0 },
                Stream { workflow: "image".into(), interval_s: 2.0 },
                Stream { workflow: "weather".into(), interval_s: weather_interval_s },
                Stream { workflow: "emergency".into(), interval_s: 120.0 },
            ],
        }],
    )
}

/// One couch order every five seconds for 15 minutes.
fn smartfactory() -> LoadProfile {
    profile(
        vec![workflow("order", vec![step("orderSupplies", None, 0.0)])],
        vec![Phase::Periodic {
            name: "orders".into(),
            duration_s: 900.0,
            streams: vec![Stream { workflow: "order".into(), interval_s: 5.0 }],
        }],
    )
}

/// Registration, five minutes of normal use, a 20 minute outage, then every
/// client reconnecting within five minutes.
fn streaming() -> LoadProfile {
    let s = |entry: &str| step(entry, None, 1_000.0);
    profile(
        vec![
            workflow("register", vec![s("registerUser"), s("registerDevice")]),
            workflow("watch", vec![s("authenticate"), s("requestVideo"), s("updateMetadata")]),
            workflow("upload", vec![s("authenticate"), s("addVideo")]),
            workflow("resume", vec![s("authenticate"), s("getMetadata"), s("updateMetadata")]),
        ],
        vec![
            Phase::Burst {
                name: "registration".into(),
                total: STREAMING_REGISTRATIONS,
                duration_s: 60.0,
                mix: mix(&[("register", 1.0)]),
            },
            Phase::Burst {
                name: "normal".into(),
                total: 500,
                duration_s: 300.0,
                mix: mix(&[("watch", 0.5), ("upload", 0.2), ("resume", 0.3)]),
            },
            Phase::Pause { name: "outage".into(), duration_s: 1_200.0 },
            Phase::Burst {
                name: "reconnect".into(),
                total: 1_500,
                duration_s: 300.0,
                mix: mix(&[("resume", 0.7), ("watch", 0.3)]),
            },
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::app::load_builtin;

    #[test]
    fn all_profiles_validate_against_their_app() {
        for name in crate::app::builtin_names() {
            let app = load_builtin(name).unwrap();
            builtin_profile(name).unwrap().validate(Some(&app)).unwrap();
        }
    }

    #[test]
    fn unknown() {
        assert!(matches!(builtin_profile("nope"), Err(Error::UnknownBenchmark(_))));
    }

    #[test]
    fn webshop_workflow_lengths() {
        let p = builtin_profile("webshop").unwrap();
        assert_eq!(p.workflows.len(), 4);
        assert!(p.workflows.iter().all(|w| (1..=9).contains(&w.steps.len())));
        assert_eq!(p.total_duration(), crate::time::secs(900.0));
    }

    #[test]
    fn streaming_phase_lengths() {
        let w = builtin_profile("streaming").unwrap().windows();
        let lengths: Vec<_> = w.iter().map(|w| (w.end - w.start) / 1_000_000).collect();
        assert_eq!(lengths, vec![60, 300, 1200, 300]);
    }
}
