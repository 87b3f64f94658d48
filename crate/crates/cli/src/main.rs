use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use faasbench::analyze::Analysis;
use faasbench::app::{builtin_names, load_builtin, ApplicationSpec};
use faasbench::deploy::DeploymentConfig;
use faasbench::loadgen::{builtin_profile, LoadProfile};
use faasbench::manager::{self, RunOptions, RunRequest, Stage};
use faasbench::recipes::{default_deployment, recipe, RECIPE_NAMES};
use faasbench::time::as_ms;
use faasbench::Error;

#[derive(Parser)]
#[command(name = "faasbench", version, about = "Benchmark FaaS applications on simulated platforms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile, deploy, drive load, collect, analyze and tear down.
    Run(RunArgs),
    /// Re-analyze an existing log file.
    Analyze {
        log: PathBuf,
        /// Report directory; defaults to `reports/` next to the log.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        charts: bool,
        #[arg(long, default_value_t = 0)]
        max_parse_errors: usize,
    },
    /// List experiment recipes, or write one out as config files.
    Recipes {
        name: Option<String>,
        /// Directory for deployment.json and profile.json.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Check a benchmark, deployment and profile without running anything.
    Validate(Inputs),
}

#[derive(Args)]
struct Inputs {
    /// Built-in benchmark name or path to an application JSON file.
    benchmark: Option<String>,
    /// Start from a recipe's deployment and profile.
    #[arg(long, conflicts_with = "benchmark")]
    recipe: Option<String>,
    /// Deployment config JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Load profile JSON.
    #[arg(long)]
    profile: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Multiplies the load profile (see the profile's scale mode).
    #[arg(long)]
    scale: Option<f64>,
    #[arg(long, env = "FAASBENCH_OUT", default_value = "out")]
    out: PathBuf,
    /// Also emit SVG charts.
    #[arg(long)]
    charts: bool,
    #[arg(long, default_value_t = 0)]
    max_parse_errors: usize,
}

/// A failure with the exit code it maps to.
struct Failure(Stage, anyhow::Error);

fn config_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure(Stage::Config, e.into())
}

fn load_app(benchmark: &str) -> Result<ApplicationSpec, Error> {
    if Path::new(benchmark).extension().is_some_and(|e| e == "json") {
        ApplicationSpec::load(Path::new(benchmark))
    } else {
        load_builtin(benchmark)
    }
}

fn request(inputs: &Inputs, seed: u64) -> Result<RunRequest, Failure> {
    let config = inputs.config.as_deref().map(DeploymentConfig::load).transpose().map_err(config_err)?;
    let profile = inputs.profile.as_deref().map(LoadProfile::load).transpose().map_err(config_err)?;
    let mut req = match (&inputs.recipe, &inputs.benchmark) {
        (Some(name), _) => RunRequest::from_recipe(&recipe(name).map_err(config_err)?, seed).map_err(config_err)?,
        (None, Some(benchmark)) => {
            let app = load_app(benchmark).map_err(config_err)?;
            let builtin = builtin_names().contains(&app.name.as_str());
            let deployment = match (config.clone(), builtin) {
                (Some(c), _) => c,
                (None, true) => default_deployment(&app.name).map_err(config_err)?,
                (None, false) => {
                    return Err(config_err(anyhow::anyhow!("--config is required for a custom application")))
                }
            };
            let load = match (profile.clone(), builtin) {
                (Some(p), _) => p,
                (None, true) => builtin_profile(&app.name).map_err(config_err)?,
                (None, false) => {
                    return Err(config_err(anyhow::anyhow!("--profile is required for a custom application")))
                }
            };
            RunRequest {
                benchmark: app.name.clone(),
                app,
                deployment,
                profile: load,
                seed,
                deployment_source: None,
                profile_source: None,
            }
        }
        (None, None) => return Err(config_err(anyhow::anyhow!("name a benchmark or pass --recipe"))),
    };
    if let (Some(c), Some(path)) = (config, &inputs.config) {
        req.deployment = c;
        req.deployment_source = Some(path.display().to_string());
    }
    if let (Some(p), Some(path)) = (profile, &inputs.profile) {
        req.profile = p;
        req.profile_source = Some(path.display().to_string());
    }
    Ok(req)
}

fn print_summary(a: &Analysis) {
    println!(
        "contexts {} (complete {}, incomplete {}), parse errors {}, dropped lines {}",
        a.contexts,
        a.complete,
        a.incomplete,
        a.report.parse_errors,
        a.dropped.values().sum::<u64>()
    );
    println!("{:<40} {:>8} {:>12} {:>12} {:>12}", "metric", "count", "p25 ms", "p50 ms", "p75 ms");
    let ms = |v: Option<i64>| v.map_or("-".to_string(), |v| format!("{:.3}", as_ms(v)));
    for (name, s) in &a.summary {
        println!("{:<40} {:>8} {:>12} {:>12} {:>12}", name, s.count, ms(s.p25), ms(s.p50), ms(s.p75));
    }
    let cold: usize = a.coldstart.total_cold();
    println!("cold starts {cold}");
}

fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run(args) => {
            let mut req = request(&args.inputs, args.seed)?;
            if let Some(scale) = args.scale {
                req = req.with_scale(scale);
            }
            let opts = RunOptions { out_root: args.out, charts: args.charts, max_parse_errors: args.max_parse_errors };
            match manager::run_to_dir(&req, &opts) {
                Ok(outcome) => {
                    println!("run {} -> {}", outcome.run_id, outcome.run_dir.display());
                    print_summary(&outcome.analysis);
                    if !outcome.teardown.all_removed() {
                        eprintln!("warning: teardown incomplete: {:?}", outcome.teardown.outcomes);
                    }
                    Ok(())
                }
                Err(f) => {
                    if let Some(dir) = &f.run_dir {
                        eprintln!("run directory: {}", dir.display());
                    }
                    Err(Failure(f.stage, f.error.into()))
                }
            }
        }
        Command::Analyze { log, out, charts, max_parse_errors } => {
            if !log.is_file() {
                return Err(config_err(anyhow::anyhow!("log file {} not found", log.display())));
            }
            let reports = out.unwrap_or_else(|| log.parent().unwrap_or(Path::new(".")).join(manager::REPORTS_DIR));
            let opts = RunOptions { out_root: reports.clone(), charts, max_parse_errors };
            let analysis =
                manager::analyze_file(&log, &reports, &opts).map_err(|e| Failure(Stage::Analysis, e.into()))?;
            println!("reports -> {}", reports.display());
            print_summary(&analysis);
            Ok(())
        }
        Command::Recipes { name: None, .. } => {
            for name in RECIPE_NAMES {
                let r = recipe(name).expect("built-in recipe");
                println!("{name:<24} {}", r.benchmark);
            }
            Ok(())
        }
        Command::Recipes { name: Some(name), out } => {
            let r = recipe(&name).map_err(config_err)?;
            let (d, p) = r.write_to(&out).map_err(config_err)?;
            println!("{}\n{}", d.display(), p.display());
            Ok(())
        }
        Command::Validate(inputs) => {
            let req = request(&inputs, 0)?;
            let plan = manager::validate(&req).map_err(config_err)?;
            println!(
                "ok: {} functions on {} platform(s), {} publisher(s)",
                req.app.functions.len(),
                plan.artifacts.len(),
                plan.publishers.len()
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(stage, e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(stage.exit_code() as u8)
        }
    }
}
