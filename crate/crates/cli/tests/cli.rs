use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn faasbench(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_faasbench"))
        .args(args)
        .current_dir(cwd)
        .env_remove("FAASBENCH_OUT")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited")
}

fn run_dirs(out: &Path) -> Vec<PathBuf> {
    let mut dirs: Vec<_> = fs::read_dir(out).map(|d| d.map(|e| e.unwrap().path()).collect()).unwrap_or_default();
    dirs.sort();
    dirs
}

#[test]
fn repeated_runs_are_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for out in [&a, &b] {
        let o = faasbench(
            &["run", "webshop", "--seed", "7", "--scale", "0.01", "--out", out.to_str().unwrap()],
            tmp.path(),
        );
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (ra, rb) = (run_dirs(&a), run_dirs(&b));
    assert_eq!(ra.len(), 1);
    assert_eq!(ra[0].file_name(), rb[0].file_name());
    let log_a = fs::read(ra[0].join("raw.log")).unwrap();
    assert_eq!(log_a, fs::read(rb[0].join("raw.log")).unwrap());
    assert!(!log_a.is_empty());
    assert_eq!(
        fs::read(ra[0].join("reports/summary.json")).unwrap(),
        fs::read(rb[0].join("reports/summary.json")).unwrap()
    );
}

#[test]
fn second_run_in_same_dir_gets_a_new_id() {
    let tmp = tempfile::tempdir().unwrap();
    for _ in 0..2 {
        let o = faasbench(&["run", "webshop", "--scale", "0.005", "--out", "o"], tmp.path());
        assert_eq!(code(&o), 0);
    }
    let dirs = run_dirs(&tmp.path().join("o"));
    assert_eq!(dirs.len(), 2);
    assert_ne!(dirs[0], dirs[1]);
}

#[test]
fn invalid_config_deploys_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.json");
    fs::write(&cfg, r#"{"platforms": [{"id": "a"}], "assignment": {"frontend": "nowhere"}, "services": {}}"#).unwrap();
    let o = faasbench(&["run", "webshop", "--config", cfg.to_str().unwrap(), "--out", "o"], tmp.path());
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(run_dirs(&tmp.path().join("o")).is_empty());

    let o = faasbench(&["run", "nosuchbench", "--out", "o"], tmp.path());
    assert_eq!(code(&o), 2);
    let o = faasbench(&["run", "--recipe", "exp9", "--out", "o"], tmp.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn factory_recipe_reports_trigger_routes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = faasbench(&["run", "--recipe", "exp3-three-way-factory", "--scale", "0.1", "--out", "o"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let run = &run_dirs(&tmp.path().join("o"))[0];
    let summary = fs::read_to_string(run.join("reports/trigger_summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert!(lines.next().unwrap().starts_with("origin,destination,count"));
    let routes: Vec<(&str, &str)> = lines
        .map(|l| {
            let mut f = l.split(',');
            (f.next().unwrap(), f.next().unwrap())
        })
        .collect();
    for route in [("cloud-a", "cloud-b"), ("cloud-a", "cloud-c"), ("cloud-b", "cloud-a")] {
        assert!(routes.contains(&route), "{route:?} in {routes:?}");
    }
    assert!(fs::read_to_string(run.join("reports/trigger_delay.csv")).unwrap().lines().count() > 1);
}

#[test]
fn reanalysis_reproduces_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let o = faasbench(&["run", "smartfactory", "--scale", "0.05", "--out", "o", "--charts"], tmp.path());
    assert_eq!(code(&o), 0);
    let run = &run_dirs(&tmp.path().join("o"))[0];
    assert!(run.join("manifest.json").is_file());
    assert!(run.join("reports/latency_boxplot.svg").is_file());
    let o = faasbench(&["analyze", run.join("raw.log").to_str().unwrap(), "--out", "again"], tmp.path());
    assert_eq!(code(&o), 0);
    for f in ["summary.json", "latency.csv", "trigger_delay.csv", "coldstart.csv"] {
        assert_eq!(
            fs::read(run.join("reports").join(f)).unwrap(),
            fs::read(tmp.path().join("again").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn truncated_log_fails_analysis_but_writes_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let o = faasbench(&["run", "webshop", "--scale", "0.005", "--out", "o"], tmp.path());
    assert_eq!(code(&o), 0);
    let run = &run_dirs(&tmp.path().join("o"))[0];
    let text = fs::read_to_string(run.join("raw.log")).unwrap();
    let cut = tmp.path().join("cut.log");
    fs::write(&cut, &text[..text.len() - 20]).unwrap();

    let o = faasbench(&["analyze", cut.to_str().unwrap(), "--out", "strict"], tmp.path());
    assert_eq!(code(&o), 5);
    assert!(tmp.path().join("strict/summary.json").is_file());

    let o = faasbench(&["analyze", cut.to_str().unwrap(), "--out", "lenient", "--max-parse-errors", "1"], tmp.path());
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("parse errors 1"));
}

#[test]
fn header_only_log_is_fine() {
    let tmp = tempfile::tempdir().unwrap();
    let log = tmp.path().join("empty.log");
    fs::write(&log, "#trace-log\tv1\n").unwrap();
    let o = faasbench(&["analyze", log.to_str().unwrap()], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(tmp.path().join("reports/latency.csv").is_file());

    let o = faasbench(&["analyze", "missing.log"], tmp.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn wrong_log_version_is_an_analysis_error() {
    let tmp = tempfile::tempdir().unwrap();
    let log = tmp.path().join("v9.log");
    fs::write(&log, "#trace-log\tv9\n").unwrap();
    assert_eq!(code(&faasbench(&["analyze", log.to_str().unwrap()], tmp.path())), 5);
}

#[test]
fn recipes_list_and_write() {
    let tmp = tempfile::tempdir().unwrap();
    let o = faasbench(&["recipes"], tmp.path());
    assert_eq!(code(&o), 0);
    let listing = String::from_utf8_lossy(&o.stdout).into_owned();
    assert_eq!(listing.lines().count(), 5);
    assert!(listing.contains("exp4-coldstart"));

    let o = faasbench(&["recipes", "exp2-edge-cloud", "--out", "cfg"], tmp.path());
    assert_eq!(code(&o), 0);
    let cfg = tmp.path().join("cfg");
    let o = faasbench(
        &[
            "validate",
            "smartcity",
            "--config",
            cfg.join("deployment.json").to_str().unwrap(),
            "--profile",
            cfg.join("profile.json").to_str().unwrap(),
        ],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("2 platform(s)"));
}

#[test]
fn out_dir_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_faasbench"))
        .args(["run", "webshop", "--scale", "0.005"])
        .current_dir(tmp.path())
        .env("FAASBENCH_OUT", "from-env")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert_eq!(run_dirs(&tmp.path().join("from-env")).len(), 1);
}
