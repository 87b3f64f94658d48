//! Ready-to-run experiment setups: a deployment and a load profile per
//! experiment. Latency parameters are illustrative round numbers, not
//! measurements.
//!
//! Three cloud platforms (`cloud-a`, `cloud-b`, `cloud-c`) and one edge
//! platform are available. The keyed store always lives on `cloud-a`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::app::{load_builtin, DEFAULT_STORE};
use crate::deploy::{DeploymentConfig, ServiceBinding, DEFAULT_TRACING_OVERHEAD_BYTES};
use crate::dist::Dist;
use crate::error::Error;
use crate::loadgen::{builtin, builtin_profile, LoadProfile};
use crate::sim::PlatformSpec;
use crate::trace::LOADGEN_PLATFORM;

pub const RECIPE_NAMES: [&str; 5] =
    ["exp1-single-cloud", "exp2-edge-cloud", "exp2-edge-only", "exp3-three-way-factory", "exp4-coldstart"];

pub const CLOUDS: [&str; 3] = ["cloud-a", "cloud-b", "cloud-c"];
pub const EDGE: &str = "edge";

/// One-way latencies in milliseconds.
pub const CLOUD_INTERNAL_MS: f64 = 15.0;
pub const CLOUD_TO_CLOUD_MS: f64 = 45.0;
pub const LOADGEN_TO_CLOUD_MS: f64 = 40.0;
pub const EDGE_INTERNAL_MS: f64 = 1.0;
pub const EDGE_TO_CLOUD_MS: f64 = 40.0;
pub const LOADGEN_TO_EDGE_MS: f64 = 1.0;
/// Store operation latency for callers next to it.
pub const STORE_OP_MS: f64 = 3.0;

const SIGMA: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct Recipe {
    pub name: String,
    pub benchmark: String,
    pub deployment: DeploymentConfig,
    pub profile: LoadProfile,
}

impl Recipe {
    /// Writes `deployment.json` and `profile.json` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<(PathBuf, PathBuf), Error> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let d = dir.join("deployment.json");
        let p = dir.join("profile.json");
        std::fs::write(&d, self.deployment.to_json() + "\n").map_err(|e| Error::io(&d, e))?;
        std::fs::write(&p, self.profile.to_json() + "\n").map_err(|e| Error::io(&p, e))?;
        Ok((d, p))
    }
}

fn ln(median_ms: f64) -> Dist {
    Dist::lognormal(median_ms, SIGMA)
}

fn cloud(id: &str) -> PlatformSpec {
    let mut p =
        PlatformSpec::new(id).with_link(id, ln(CLOUD_INTERNAL_MS)).with_link(LOADGEN_PLATFORM, ln(LOADGEN_TO_CLOUD_MS));
    p.cold_start = ln(300.0);
    p.trigger_delay = ln(100.0);
    p.publisher_exec = ln(2.0);
    p
}

fn clouds() -> Vec<PlatformSpec> {
    let mut out: Vec<PlatformSpec> = CLOUDS.iter().map(|id| cloud(id)).collect();
    // cross-cloud links live on the lexically smaller side
    for (i, p) in out.iter_mut().enumerate() {
        for peer in &CLOUDS[i + 1..] {
            p.network.insert(peer.to_string(), ln(CLOUD_TO_CLOUD_MS));
        }
    }
    out
}

fn edge() -> PlatformSpec {
    let mut p = PlatformSpec::new(EDGE)
        .with_link(EDGE, ln(EDGE_INTERNAL_MS))
        .with_link(LOADGEN_PLATFORM, ln(LOADGEN_TO_EDGE_MS))
        .with_link(CLOUDS[0], ln(EDGE_TO_CLOUD_MS));
    p.cold_start = ln(150.0);
    p.trigger_delay = ln(20.0);
    p.publisher_exec = ln(1.0);
    p
}

/// Store on `cloud-a`; callers elsewhere pay a round trip on top.
fn store(remote: &[(&str, f64)]) -> BTreeMap<String, ServiceBinding> {
    let from = remote
        .iter()
        .map(|(platform, one_way)| (platform.to_string(), Dist::lognormal(STORE_OP_MS + 2.0 * one_way, 0.1)))
        .collect();
    BTreeMap::from([(
        DEFAULT_STORE.to_string(),
        ServiceBinding { host: CLOUDS[0].into(), op_latency: ln(STORE_OP_MS), from },
    )])
}

fn config(platforms: Vec<PlatformSpec>, assignment: &[(&str, &str)], remote: &[(&str, f64)]) -> DeploymentConfig {
    DeploymentConfig {
        platforms,
        assignment: assignment.iter().map(|(f, p)| (f.to_string(), p.to_string())).collect(),
        services: store(remote),
        compute_override: None,
        tracing_overhead_bytes: DEFAULT_TRACING_OVERHEAD_BYTES,
    }
}

fn everything_on(benchmark: &str, platform: &str) -> Result<Vec<(String, String)>, Error> {
    Ok(load_builtin(benchmark)?.functions.iter().map(|f| (f.name.clone(), platform.to_string())).collect())
}

fn pairs(v: &[(String, String)]) -> Vec<(&str, &str)> {
    v.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect()
}

/// Every function of a built-in benchmark on `cloud-a`, next to the store.
pub fn default_deployment(benchmark: &str) -> Result<DeploymentConfig, Error> {
    let all = everything_on(benchmark, CLOUDS[0])?;
    Ok(config(vec![cloud(CLOUDS[0])], &pairs(&all), &[]))
}

const LIGHT_FUNCTIONS: [&str; 2] = ["calculateLightPhase", "setLightPhase"];

pub fn recipe(name: &str) -> Result<Recipe, Error> {
    let (benchmark, deployment, profile) = match name {
        "exp1-single-cloud" => ("webshop", default_deployment("webshop")?, builtin_profile("webshop")?),
        "exp2-edge-cloud" | "exp2-edge-only" => {
            let split = name == "exp2-edge-cloud";
            let mut all = everything_on("smartcity", EDGE)?;
            if split {
                for (f, p) in &mut all {
                    if !LIGHT_FUNCTIONS.contains(&f.as_str()) {
                        *p = CLOUDS[0].into();
                    }
                }
            }
            // the load generator plays the sensors, next to the edge device
            let cfg = config(vec![cloud(CLOUDS[0]), edge()], &pairs(&all), &[(EDGE, EDGE_TO_CLOUD_MS)]);
            ("smartcity", cfg, builtin::smartcity(10.0))
        }
        "exp3-three-way-factory" => {
            let assignment = [
                ("orderSupplies", CLOUDS[0]),
                ("billing", CLOUDS[0]),
                ("payment", CLOUDS[0]),
                ("orderPanel", CLOUDS[1]),
                ("producePanel", CLOUDS[1]),
                ("orderCushion", CLOUDS[2]),
                ("produceCushion", CLOUDS[2]),
            ];
            let mut platforms = clouds();
            platforms[1].trigger_delay = ln(60.0);
            platforms[2].trigger_delay = ln(150.0);
            let remote = [(CLOUDS[1], CLOUD_TO_CLOUD_MS), (CLOUDS[2], CLOUD_TO_CLOUD_MS)];
            ("smartfactory", config(platforms, &assignment, &remote), builtin_profile("smartfactory")?)
        }
        "exp4-coldstart" => {
            let all = everything_on("streaming", CLOUDS[0])?;
            let mut p = PlatformSpec::new(CLOUDS[0])
                .with_link(CLOUDS[0], Dist::Constant(CLOUD_INTERNAL_MS))
                .with_link(LOADGEN_PLATFORM, Dist::Constant(LOADGEN_TO_CLOUD_MS));
            p.keep_alive_ms = 60_000.0;
            p.cold_start = Dist::Constant(400.0);
            let mut cfg = config(vec![p], &pairs(&all), &[]);
            cfg.services.get_mut(DEFAULT_STORE).unwrap().op_latency = Dist::Constant(STORE_OP_MS);
            cfg.compute_override = Some(Dist::Constant(1.0));
            ("streaming", cfg, builtin_profile("streaming")?)
        }
        other => return Err(Error::UnknownRecipe(other.to_string())),
    };
    Ok(Recipe { name: name.into(), benchmark: benchmark.into(), deployment, profile })
}
