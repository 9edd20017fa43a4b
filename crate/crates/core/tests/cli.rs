use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_cbre");

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn cbre(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("CBRE_THREADS").output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn small_sim_config(dir: &Path) -> String {
    write(
        dir,
        "sim.json",
        r#"{
  "schema_version": 1,
  "model": {
    "branching": { "b": 0.0, "gamma": 1.0 },
    "environment": { "d": 0.0, "sigma": 1.0 },
    "competition": { "kind": "logistic", "c": 1.0 }
  },
  "simulation": { "dt": 0.01, "t_max": 20.0, "n_paths": 400, "seed": 11 },
  "analytics": { "lambdas": [1.0], "levels": [0.0], "x0s": [1.0] }
}"#,
    )
}

/// Keys and JSON types of a document, with arrays reduced to their first
/// element.
fn shape(v: &Value) -> Value {
    match v {
        Value::Null => "null".into(),
        Value::Bool(_) => "bool".into(),
        Value::Number(_) => "number".into(),
        Value::String(_) => "string".into(),
        Value::Array(a) => Value::Array(a.first().map(shape).into_iter().collect()),
        Value::Object(m) => Value::Object(m.iter().map(|(k, v)| (k.clone(), shape(v))).collect()),
    }
}

fn check_golden(name: &str, doc: &Value) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    let got = serde_json::to_string_pretty(&shape(doc)).unwrap() + "\n";
    if std::env::var_os("CBRE_BLESS").is_some() {
        fs::write(&path, &got).unwrap();
        return;
    }
    let want = fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing golden {}; run with CBRE_BLESS=1", path.display()));
    assert_eq!(got, want, "shape of {name} changed");
}

#[test]
fn classify_feller_logistic_goes_extinct() {
    let cfg = configs().join("feller_logistic.json");
    let o = cbre(&["classify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["schema_version"], 1);
    assert_eq!(doc["extinction"]["value"]["extinct_as"], true);
    assert_eq!(doc["decided"], true);
    check_golden("classify_feller_logistic.json", &doc);
}

#[test]
fn classify_subordinator_is_decided_by_its_regime() {
    let cfg = configs().join("stochastic_logistic.json");
    let o = cbre(&["classify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["subordinator"]["value"]["regime"], "positive_recurrent");
    assert!(doc["diffusion"].is_null());
}

#[test]
fn classify_undecided_model_is_inconclusive() {
    let dir = tempfile::tempdir().unwrap();
    // supercritical pure drift without competition: no rule decides
    let m = write(
        dir.path(),
        "m.json",
        r#"{ "branching": { "b": 1.0, "gamma": 0.0 }, "environment": { "d": 0.0, "sigma": 0.0 }, "competition": { "kind": "none" } }"#,
    );
    let o = cbre(&["classify", "--model", &m]);
    assert_eq!(code(&o), 2, "stdout {} stderr {}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr));
}

#[test]
fn missing_branching_is_malformed_with_a_located_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "bad.json", "{\n  \"environment\": { \"d\": 0.0, \"sigma\": 1.0 },\n  \"competition\": { \"kind\": \"none\" }\n}\n");
    let o = cbre(&["classify", "--model", &m]);
    assert_eq!(code(&o), 1);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("branching"), "{err}");
    assert!(err.contains("bad.json:"), "{err}");
}

#[test]
fn unknown_key_and_wrong_schema_version_are_malformed() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.json", r#"{ "schema_version": 1, "simulation": { "dtt": 0.1 } }"#);
    let o = cbre(&["classify", "--config", &a]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("simulation"));
    let b = write(dir.path(), "b.json", r#"{ "schema_version": 7 }"#);
    let o = cbre(&["classify", "--config", &b]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("schema_version"));
}

#[test]
fn no_model_is_malformed() {
    assert_eq!(code(&cbre(&["analytics"])), 1);
}

#[test]
fn simulate_is_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_sim_config(dir.path());
    let before = fs::read(&cfg).unwrap();
    let mut outputs = Vec::new();
    for (i, threads) in ["1", "1", "4"].iter().enumerate() {
        let out = dir.path().join(format!("run{i}"));
        let o = cbre(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap(), "--threads", threads, "--format", "json"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(fs::read(out.join("summary.json")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
    assert_eq!(fs::read(&cfg).unwrap(), before, "configuration file was modified");
    let doc: Value = serde_json::from_slice(&outputs[0]).unwrap();
    assert!(doc["simulation"].get("threads").is_none());
    check_golden("simulate_summary.json", &doc);
}

#[test]
fn simulate_passes_library_estimates_through() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_sim_config(dir.path());
    let o = cbre(&["simulate", "--config", &cfg]);
    assert_eq!(code(&o), 0);
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    let parsed = cbre::cli::config::load_config(Path::new(&cfg)).unwrap();
    let model = parsed.model.unwrap();
    let est = cbre::simulate::estimate_hitting(&model, 1.0, 0.0, &[1.0], &parsed.simulation).unwrap();
    assert_eq!(doc["estimates"][0]["hitting"], serde_json::to_value(&est).unwrap());
}

#[test]
fn zero_horizon_gives_empty_estimates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "z.json",
        r#"{
  "schema_version": 1,
  "model": {
    "branching": { "b": 0.0, "gamma": 1.0 },
    "environment": { "d": 0.0, "sigma": 0.0 },
    "competition": { "kind": "logistic", "c": 1.0 }
  },
  "simulation": { "n_paths": 1, "t_max": 0.0 }
}"#,
    );
    let o = cbre(&["simulate", "--config", &cfg]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["estimates"], Value::Array(vec![]));
}

#[test]
fn csv_has_header_and_full_precision() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_sim_config(dir.path());
    let o = cbre(&["simulate", "--config", &cfg, "--format", "csv"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x0,level,lambda,quantity,value,stderr"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first.len(), 6);
    let mantissa = first[4].split('e').next().unwrap();
    assert_eq!(mantissa.len(), 19, "{}", first[4]);
}

#[test]
fn failed_run_removes_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_sim_config(dir.path());
    let out = dir.path().join("out");
    fs::create_dir(&out).unwrap();
    // a plain file where the paths directory should go
    fs::write(out.join("paths"), "").unwrap();
    let o = cbre(&["simulate", "--paths", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(!out.join("summary.json").exists(), "partial summary left behind");
    assert!(out.join("paths").is_file(), "pre-existing file was touched");
}

#[test]
fn analytics_report_shape() {
    let cfg = configs().join("feller_logistic.json");
    let o = cbre(&["analytics", "--config", cfg.to_str().unwrap(), "--format", "json"]);
    assert_eq!(code(&o), 0);
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    let entries = doc["entries"].as_array().unwrap();
    assert!(entries.iter().any(|e| e["quantity"] == "mean_extinction_time"));
    check_golden("analytics_feller_logistic.json", &doc);
}

#[test]
fn validate_skipped_row_is_inconclusive() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "v.json", r#"{ "schema_version": 1, "validation": { "rows": [ { "row": "gamblers_ruin", "gamma": 0.0, "sigma": 0.0 } ] } }"#);
    let out = dir.path().join("out");
    let o = cbre(&["validate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    let doc: Value = serde_json::from_str(&fs::read_to_string(out.join("validation.json")).unwrap()).unwrap();
    assert_eq!(doc["rows"][0]["status"], "skipped");
}

#[test]
fn validate_single_row_passes() {
    let o = cbre(&["validate", "--row", "closed_form_m"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("[PASS]"));
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    check_golden("validation_closed_form_m.json", &doc);
}

#[test]
fn validate_gamblers_ruin_passes() {
    let o = cbre(&["validate", "--row", "gamblers_ruin"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn validate_unknown_row_fails() {
    assert_eq!(code(&cbre(&["validate", "--row", "no_such_row"])), 1);
}
