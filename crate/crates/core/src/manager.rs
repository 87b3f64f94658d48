//! One benchmark run end to end: compile, deploy, drive load, collect logs,
//! analyze, tear down. Output goes to `<out>/<run id>/`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::analyze::{analyze, parse_logs, write_reports, Analysis};
use crate::app::{load_builtin, ApplicationSpec};
use crate::deploy::{compile, deploy_as, teardown, DeploymentConfig, RunIds, TeardownReport};
use crate::error::Error;
use crate::loadgen::{builtin_profile, execute, schedule, LoadProfile};
use crate::recipes::Recipe;
use crate::sim::{GroundTruth, SimCluster};
use crate::trace::header_line;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const RAW_LOG_FILE: &str = "raw.log";
pub const REPORTS_DIR: &str = "reports";

/// Which part of the pipeline failed. Each maps to its own exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Config,
    Deploy,
    Run,
    Analysis,
}

impl Stage {
    pub fn exit_code(self) -> i32 {
        match self {
            Stage::Config => 2,
            Stage::Deploy => 3,
            Stage::Run => 4,
            Stage::Analysis => 5,
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage:?} stage failed: {error}")]
pub struct RunFailure {
    pub stage: Stage,
    pub error: Error,
    /// Set once the output directory exists.
    pub run_dir: Option<PathBuf>,
}

fn fail(stage: Stage, run_dir: Option<&Path>) -> impl FnOnce(Error) -> RunFailure + '_ {
    move |error| RunFailure { stage, error, run_dir: run_dir.map(Path::to_path_buf) }
}

/// Everything needed to start a run.
#[derive(Debug, Clone)]
pub struct RunRequest {
    pub benchmark: String,
    pub app: ApplicationSpec,
    pub deployment: DeploymentConfig,
    pub profile: LoadProfile,
    pub seed: u64,
    /// Where the deployment and profile came from, for the manifest.
    pub deployment_source: Option<String>,
    pub profile_source: Option<String>,
}

impl RunRequest {
    /// A built-in benchmark with its default profile.
    pub fn builtin(benchmark: &str, deployment: DeploymentConfig, seed: u64) -> Result<Self, Error> {
        Ok(RunRequest {
            benchmark: benchmark.into(),
            app: load_builtin(benchmark)?,
            deployment,
            profile: builtin_profile(benchmark)?,
            seed,
            deployment_source: None,
            profile_source: None,
        })
    }

    pub fn from_recipe(recipe: &Recipe, seed: u64) -> Result<Self, Error> {
        Ok(RunRequest {
            app: load_builtin(&recipe.benchmark)?,
            benchmark: recipe.benchmark.clone(),
            deployment: recipe.deployment.clone(),
            profile: recipe.profile.clone(),
            seed,
            deployment_source: Some(format!("recipe:{}", recipe.name)),
            profile_source: Some(format!("recipe:{}", recipe.name)),
        })
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.profile = self.profile.with_scale(scale);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub benchmark: String,
    pub deployment_source: Option<String>,
    pub profile_source: Option<String>,
    pub seed: u64,
    pub scale: f64,
    pub version: String,
    pub output_dir: PathBuf,
    pub created_unix_ms: u128,
    pub finished_unix_ms: Option<u128>,
    pub status: Option<String>,
    /// Full inputs, so the manifest alone reproduces the run.
    pub application: ApplicationSpec,
    pub deployment: DeploymentConfig,
    pub profile: LoadProfile,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("manifest: {e}")))
    }

    fn write(&self, dir: &Path) -> Result<(), Error> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes") + "\n";
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

fn unix_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis())
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_root: PathBuf,
    pub charts: bool,
    /// Parse errors tolerated before the analysis counts as failed.
    pub max_parse_errors: usize,
}

impl RunOptions {
    pub fn new(out_root: impl Into<PathBuf>) -> Self {
        RunOptions { out_root: out_root.into(), charts: false, max_parse_errors: 0 }
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub run_id: String,
    pub run_dir: PathBuf,
    pub raw_log: PathBuf,
    pub analysis: Analysis,
    pub truth: GroundTruth,
    pub teardown: TeardownReport,
}

/// Checks inputs and compiles the deployment without touching any platform.
pub fn validate(req: &RunRequest) -> Result<crate::deploy::DeploymentPlan, Error> {
    req.profile.validate(Some(&req.app))?;
    compile(&req.app, &req.deployment)
}

/// Runs on a fresh simulated cluster.
pub fn run_to_dir(req: &RunRequest, opts: &RunOptions) -> Result<RunOutcome, RunFailure> {
    run_on(&SimCluster::new(), req, opts)
}

/// Runs on `cluster`. Whatever happens after deployment, the run is torn
/// down before returning.
pub fn run_on(cluster: &SimCluster, req: &RunRequest, opts: &RunOptions) -> Result<RunOutcome, RunFailure> {
    let plan = validate(req).map_err(fail(Stage::Config, None))?;

    fs::create_dir_all(&opts.out_root).map_err(|e| fail(Stage::Config, None)(Error::io(&opts.out_root, e)))?;
    let run_id = RunIds::new(req.seed).next_id_where(|id| !opts.out_root.join(id).exists());
    let run_dir = opts.out_root.join(&run_id);
    fs::create_dir_all(&run_dir).map_err(|e| fail(Stage::Config, None)(Error::io(&run_dir, e)))?;
    let mut manifest = RunManifest {
        run_id: run_id.clone(),
        benchmark: req.benchmark.clone(),
        deployment_source: req.deployment_source.clone(),
        profile_source: req.profile_source.clone(),
        seed: req.seed,
        scale: req.profile.scale,
        version: env!("CARGO_PKG_VERSION").to_string(),
        output_dir: run_dir.clone(),
        created_unix_ms: unix_ms(),
        finished_unix_ms: None,
        status: None,
        application: req.app.clone(),
        deployment: req.deployment.clone(),
        profile: req.profile.clone(),
    };
    manifest.write(&run_dir).map_err(fail(Stage::Config, Some(&run_dir)))?;

    let mut adapters = cluster.adapters(&plan);
    let mut handle = deploy_as(&plan, &mut adapters, run_id.clone()).map_err(fail(Stage::Deploy, Some(&run_dir)))?;

    let collected = (|| -> Result<(Vec<String>, GroundTruth), Error> {
        let mut sim = cluster.start(&run_id, &plan, req.seed)?;
        execute(&schedule(&req.profile, req.seed), &req.profile, &mut sim)?;
        let output = sim.finish();
        cluster.store_logs(&output);
        let mut lines = vec![header_line()];
        lines.extend(req.profile.windows().iter().map(|w| w.to_line(&run_id)));
        lines.extend(output.loadgen_log.iter().cloned());
        for artifact in &plan.artifacts {
            let adapter = adapters.get_mut(artifact.platform_id()).expect("deployed through this adapter");
            let logs = adapter
                .collect_logs(&run_id)
                .map_err(|e| Error::AdapterFailure { platform: artifact.platform_id().into(), cause: e.0 })?;
            lines.extend(logs);
        }
        Ok((lines, output.truth))
    })();
    let report = teardown(&mut handle, &mut adapters);
    let (lines, truth) = collected.map_err(fail(Stage::Run, Some(&run_dir)))?;

    let raw_log = run_dir.join(RAW_LOG_FILE);
    let mut text = lines.join("\n");
    text.push('\n');
    fs::write(&raw_log, text).map_err(|e| fail(Stage::Run, Some(&run_dir))(Error::io(&raw_log, e)))?;

    let analysis = analyze_lines(lines.iter().map(String::as_str), &run_dir.join(REPORTS_DIR), opts)
        .map_err(fail(Stage::Analysis, Some(&run_dir)))?;

    manifest.finished_unix_ms = Some(unix_ms());
    manifest.status = Some(if report.all_removed() { "completed" } else { "completed, teardown incomplete" }.into());
    manifest.write(&run_dir).map_err(fail(Stage::Run, Some(&run_dir)))?;

    Ok(RunOutcome { run_id, run_dir, raw_log, analysis, truth, teardown: report })
}

/// Parses and analyzes log lines and writes the reports. Reports are written
/// even when the parse error threshold is exceeded.
pub fn analyze_lines<'a>(
    lines: impl IntoIterator<Item = &'a str>,
    reports: &Path,
    opts: &RunOptions,
) -> Result<Analysis, Error> {
    let log = parse_logs(lines)?;
    let analysis = analyze(&log);
    write_reports(&analysis, reports, opts.charts)?;
    if log.report.parse_errors > opts.max_parse_errors {
        return Err(Error::TooManyParseErrors { found: log.report.parse_errors, allowed: opts.max_parse_errors });
    }
    Ok(analysis)
}

/// Offline analysis of an existing log file.
pub fn analyze_file(log: &Path, reports: &Path, opts: &RunOptions) -> Result<Analysis, Error> {
    let text = fs::read_to_string(log).map_err(|e| Error::io(log, e))?;
    analyze_lines(text.lines(), reports, opts)
}
