use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn dpsubmod(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dpsubmod"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn config(delta: f64, extra: &str) -> String {
    format!(
        r#"{{
  "schema_version": 1,
  "algorithm": "full_info",
  "stream": {{"spec": {{"family": "coverage", "n": 4, "horizon": 100,
             "distribution": {{"kind": "iid_uniform", "low": 0.0, "high": 1.0}}, "seed": 7}}}},
  "k": 1, "eps": 1.0, "delta": {delta}, "seeds": [1, 2, 3]{extra}
}}"#
    )
}

#[test]
fn run_writes_csv_and_traces() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "exp.json", &config(0.01, ""));
    let out = dir.path().join("out");
    let status = dpsubmod(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));

    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "T,seed,eps,delta,gamma,eta,payoff,opt_value,regret_1e,oracle_kind,explore_count"
    );
    assert_eq!(lines.count(), 3);
    let traces: Vec<_> = fs::read_dir(out.join("traces")).unwrap().collect();
    assert_eq!(traces.len(), 3);
    let trace = fs::read_to_string(out.join("traces/T100_seed1.jsonl")).unwrap();
    assert_eq!(trace.lines().count(), 100);
    assert!(out.join("params.json").exists());

    let again = dir.path().join("again");
    let status = dpsubmod(&["run", "--config", &cfg, "--out", again.to_str().unwrap(), "--workers", "1"]);
    assert!(status.status.success());
    assert_eq!(csv, fs::read_to_string(again.join("results.csv")).unwrap());
}

#[test]
fn bad_delta_is_a_precondition_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "exp.json", &config(1.5, ""));
    let out = dpsubmod(&["run", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("calibrate_eta_full_info"));
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "exp.json", &config(0.01, r#", "sedes": [4]"#));
    let out = dpsubmod(&["run", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sedes"));
}

#[test]
fn sweep_fits_a_slope() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "exp.json",
        r#"{
  "schema_version": 1,
  "algorithm": "bandit:interval",
  "stream": {"spec": {"family": "coverage", "n": 4, "horizon": 1000,
             "distribution": {"kind": "planted_favorite", "favorite": 0, "favorite_value": 0.9,
                              "others_low": 0.0, "others_high": 0.3}, "seed": 3}},
  "k": 1, "eps": 1.0, "delta": 0.001, "seeds": [0, 1],
  "horizons": [1000, 2000, 4000, 8000],
  "output_dir": "out"
}"#,
    );
    let out = dpsubmod(&["sweep", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let fit: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(fit["slope"].is_f64());
    let csv = dir.path().join("out/results.csv");
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 9);
    assert!(dir.path().join("out/slope.json").exists());

    let out = dpsubmod(&["slope", csv.to_str().unwrap()]);
    assert!(out.status.success());
    let again: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(fit["slope"], again["slope"]);
}

#[test]
fn sweep_needs_horizons() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "exp.json", &config(0.01, ""));
    let out = dpsubmod(&["sweep", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn check_stream_reports_violations() {
    let dir = TempDir::new().unwrap();
    let good = write(
        dir.path(),
        "good.json",
        r#"{"ground": ["a", "b"],
            "rounds": [{"family": "coverage", "params": {"p": {"a": 0.9, "b": 0.1}}},
                       {"family": "capped_modular", "params": {"w": {"a": 0.5, "b": 0.7}, "cap": 1.0}}]}"#,
    );
    let out = dpsubmod(&["check-stream", &good]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["ok"], true);
    assert_eq!(report["rounds"], 2);

    let bad = write(
        dir.path(),
        "bad.json",
        r#"{"ground": ["a"], "rounds": [{"family": "coverage", "params": {"p": {"a": 1.5}}}]}"#,
    );
    let out = dpsubmod(&["check-stream", &bad]);
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn audit_writes_report() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "audit.json",
        r#"{
  "schema_version": 1,
  "algorithm": "full_info",
  "k": 1, "eps": 0.5, "delta": 0.001,
  "streams": {"distinguishing": {"n": 2, "horizon": 3}},
  "trials": 2000,
  "bootstrap": 10
}"#,
    );
    let out_dir = dir.path().join("audit");
    let out = dpsubmod(&["audit", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["granularity"], "full_sequence");
    assert_eq!(report["underpowered"], true);
    assert!(report["eps_hat"].as_f64().unwrap() >= 0.0);
    assert!(out_dir.join("audit.json").exists());
}
