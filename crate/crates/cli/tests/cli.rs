use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use apcl::ExperimentConfig;
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_apcl"))
}

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
}

fn run(kind: &str, config: &Path, out: &Path, extra: &[&str]) -> i32 {
    let status = bin()
        .arg(kind)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .status()
        .unwrap();
    status.code().unwrap()
}

fn write_config(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn load(name: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(config_path(name)).unwrap()).unwrap()
}

fn csv_column(path: &Path, col: &str) -> Vec<f64> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let j = lines
        .next()
        .unwrap()
        .split(',')
        .position(|c| c == col)
        .unwrap();
    lines
        .map(|l| l.split(',').nth(j).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn decay_reaches_the_mean_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        run("decay", &config_path("decay.json"), dir.path(), &["--plot"]),
        0
    );
    let header = fs::read_to_string(dir.path().join("decay.csv")).unwrap();
    assert!(header.starts_with("t,l1_to_mean,min,max,mass\n"));
    let l1 = csv_column(&dir.path().join("decay.csv"), "l1_to_mean");
    assert!(*l1.last().unwrap() <= 0.05);
    // after the shock forms near t = 1/(2π·0.5) the series only decreases, up to ripples
    let t = csv_column(&dir.path().join("decay.csv"), "t");
    let after: Vec<f64> = t
        .iter()
        .zip(&l1)
        .filter(|(t, _)| **t >= 0.5)
        .map(|(_, v)| *v)
        .collect();
    assert!(after.windows(2).all(|w| w[1] <= w[0] + 1e-3));
    let svg = fs::read_to_string(dir.path().join("decay.svg")).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    assert_eq!(doc.root_element().attribute("width"), Some("800"));
    assert_eq!(doc.root_element().attribute("height"), Some("500"));
    let report: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("decay.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], Value::Bool(true));
    assert!(report["wall_clock_seconds"].as_f64().unwrap() >= 0.0);
    assert_eq!(report["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn check_flux_echoes_the_witness() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = serde_json::json!({
        "kind": "check-flux",
        "n": 1,
        "flux": {"breakpoints": ["-1", "1"], "pieces": [[[["0"], ["2"]]]], "range": ["-1", "1"]}
    });
    let p = write_config(dir.path(), "affine.json", &cfg);
    assert_eq!(run("check-flux", &p, dir.path(), &[]), 0);
    let report: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("check-flux.json")).unwrap())
            .unwrap();
    assert_eq!(report["verdicts"]["nd"]["verdict"], "degenerate");
    assert_eq!(report["verdicts"]["nd"]["k"], serde_json::json!([1]));
    assert_eq!(report["verdicts"]["nd"]["tau"], 2.0);
}

#[test]
fn contraction_distance_never_grows() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        run(
            "contraction",
            &config_path("contraction.json"),
            dir.path(),
            &[]
        ),
        0
    );
    let d = csv_column(&dir.path().join("contraction.csv"), "l1_distance");
    assert_eq!(d.len(), 201);
    assert!(d.windows(2).all(|w| w[1] <= w[0] + 1e-12));
}

#[test]
fn counterexample_overlay_plot_parses() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        run(
            "counterexample",
            &config_path("counterexample.json"),
            dir.path(),
            &["--plot"]
        ),
        0
    );
    let svg = fs::read_to_string(dir.path().join("counterexample.svg")).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    assert_eq!(
        doc.descendants()
            .filter(|n| n.has_tag_name("polyline"))
            .count(),
        2
    );
    let exact = csv_column(&dir.path().join("counterexample.csv"), "l1_to_mean_exact");
    assert!(exact
        .iter()
        .all(|&v| (v - 0.5 / std::f64::consts::PI).abs() < 1e-15));
}

#[test]
fn convergence_and_spectrum_configs_pass() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        run(
            "convergence",
            &config_path("convergence.json"),
            dir.path(),
            &[]
        ),
        0
    );
    assert_eq!(
        run("spectrum", &config_path("spectrum.json"), dir.path(), &[]),
        0
    );
    assert_eq!(
        run(
            "check-flux",
            &config_path("check_flux.json"),
            dir.path(),
            &[]
        ),
        0
    );
}

#[test]
fn identical_configs_give_identical_csv() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = config_path("contraction.json");
    assert_eq!(run("contraction", &cfg, a.path(), &[]), 0);
    assert_eq!(run("contraction", &cfg, b.path(), &["--threads", "1"]), 0);
    assert_eq!(
        fs::read(a.path().join("contraction.csv")).unwrap(),
        fs::read(b.path().join("contraction.csv")).unwrap()
    );
}

#[test]
fn report_echoes_the_parsed_config() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        run(
            "convergence",
            &config_path("convergence.json"),
            dir.path(),
            &[]
        ),
        0
    );
    let report: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("convergence.json")).unwrap())
            .unwrap();
    let echoed: ExperimentConfig = serde_json::from_value(report["config"].clone()).unwrap();
    let parsed = ExperimentConfig::load(&config_path("convergence.json")).unwrap();
    assert_eq!(echoed, parsed);
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = load("decay.json");
    cfg["flux"]["breakpoints"][0] = Value::String("1/0".into());
    let p = write_config(dir.path(), "bad_rational.json", &cfg);
    assert_eq!(run("decay", &p, dir.path(), &[]), 2);

    let mut cfg = load("decay.json");
    cfg.as_object_mut().unwrap().remove("solver");
    let p = write_config(dir.path(), "missing.json", &cfg);
    assert_eq!(run("decay", &p, dir.path(), &[]), 2);

    assert_eq!(
        run("spectrum", &config_path("decay.json"), dir.path(), &[]),
        2
    );
    assert_eq!(
        run("decay", &dir.path().join("nope.json"), dir.path(), &[]),
        2
    );
}

#[test]
fn refusals_exit_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = load("counterexample.json");
    cfg["wave"]["a"] = Value::String("-1/2".into());
    let p = write_config(dir.path(), "curved.json", &cfg);
    let out = bin()
        .args(["counterexample", "--config"])
        .arg(&p)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Degenerate"));
}

#[test]
fn threshold_failures_exit_with_4_after_writing_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = load("convergence.json");
    cfg["thresholds"]["min_order"] = serde_json::json!(1.5);
    let p = write_config(dir.path(), "strict.json", &cfg);
    assert_eq!(run("convergence", &p, dir.path(), &[]), 4);
    let report: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("convergence.json")).unwrap())
            .unwrap();
    assert_eq!(report["passed"], Value::Bool(false));
}
