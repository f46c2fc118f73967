mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::config_path;

fn geoctl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geoctl")).args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, overrides: &[(&str, &str)]) -> String {
    let mut text = std::fs::read_to_string(config_path(name)).unwrap();
    for (k, v) in overrides {
        text = geoctl::sim::config::override_key(&text, k, v).unwrap();
    }
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn simulate_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "hover.toml", &[("run.t_final", "1.0")]);
    let out = dir.path().join("out");
    let o = geoctl(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = geoctl::sim::telemetry::read_csv(&out.join("telemetry.csv")).unwrap();
    assert_eq!(rows.len(), 1001);
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["steps"], 1000);
    assert_eq!(summary["cone_violations"], 0);
}

#[test]
fn force_limit_violation_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    // Hover needs 18.64 N; the recovery transient needs more.
    let cfg = write_config(dir.path(), "circular_roll.toml", &[("limits.f_max", "19.0"), ("run.t_final", "1.0")]);
    let o = geoctl(&["simulate", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("o/summary.json")).unwrap()).unwrap();
    assert!(summary["force_violations"].as_u64().unwrap() > 0);
    assert_eq!(summary["force_feasible"], true);
}

#[test]
fn scaling_region_exit_is_2_with_time_and_component() {
    let dir = tempfile::tempdir().unwrap();
    // Ψ(0) ≈ 11.74 J and the transient overshoots 12.36 J.
    let cfg = write_config(dir.path(), "circular_roll.toml", &[("gains.psi_max", "12.1"), ("run.t_final", "1.0")]);
    let o = geoctl(&["simulate", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("controller") && err.contains("t = "), "{err}");
}

#[test]
fn usage_and_io_errors_exit_1() {
    assert_eq!(geoctl(&[]).status.code(), Some(1));
    assert_eq!(geoctl(&["simulate", "--config", "x.toml"]).status.code(), Some(1));
    assert_eq!(geoctl(&["launch"]).status.code(), Some(1));
    let o = geoctl(&["certify", "--config", "/nonexistent/cfg.toml"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/nonexistent/cfg.toml"));
    assert_eq!(geoctl(&["--help"]).status.code(), Some(0));
    assert_eq!(geoctl(&["--version"]).status.code(), Some(0));
}

#[test]
fn bad_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "hover.toml", &[("body.mass", "-1.0")]);
    let o = geoctl(&["simulate", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("body.mass"));
}

#[test]
fn certify_prints_named_constants() {
    let o = geoctl(&["certify", "--config", config_path("circular_roll.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let c = &v["certification"];
    for key in ["c1", "c2", "c3", "h1", "h2", "p1", "p2", "lambda_min_WR", "lambda_min_W", "alpha", "gamma", "f_M_d", "certified"] {
        assert!(!c[key].is_null(), "missing {key}");
    }
    assert_eq!(c["c1"], 20.0);
    assert_eq!(v["feasibility"]["attitude_feasible"], false);
    assert!(v["initial_region"]["reg_R"].is_boolean());
}

#[test]
fn certify_sequential_matches_parallel() {
    let cfg = config_path("hover_certified.toml");
    let a = geoctl(&["certify", "--config", cfg.to_str().unwrap()]);
    let b = geoctl(&["certify", "--config", cfg.to_str().unwrap(), "--sequential"]);
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["certification"]["certified"], true);
}

#[test]
fn sweep_writes_one_file_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "hover.toml", &[("run.t_final", "0.5"), ("initial.position", "[0.1, 0.0, 0.0]")]);
    let out = dir.path().join("sweep");
    let o = geoctl(&["sweep", "--config", &cfg, "--param", "gains.k_x", "--values", "5,10,15", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let mut csvs: Vec<_> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    csvs.sort();
    assert_eq!(csvs, ["000_gains.k_x=5.csv", "001_gains.k_x=10.csv", "002_gains.k_x=15.csv"]);
    assert!(out.join("sweep.json").exists());
}

#[test]
fn sweep_rejects_unknown_key() {
    let dir = tempfile::tempdir().unwrap();
    let o = geoctl(&[
        "sweep",
        "--config",
        config_path("hover.toml").to_str().unwrap(),
        "--param",
        "gains.k_q",
        "--values",
        "1,2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("gains.k_q"));
}
