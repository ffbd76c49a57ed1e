use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_photofeedback"))
        .args(args)
        .env_remove("PHOTOFEEDBACK_SEED")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn list_prints_registry() {
    let o = run(&["list"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    for name in ["fig1e_none", "fig2_chain3", "fig3_swimmer", "fig4_spring"] {
        assert!(text.contains(name), "{name} missing from list");
    }
}

#[test]
fn unknown_scenario_is_usage_error() {
    let o = run(&["scenario", "fig9_nothing"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("fig9_nothing"));
}

#[test]
fn bad_override_is_usage_error() {
    let o = run(&["scenario", "fig4_bend", "--set", "no_equals_sign"]);
    assert_eq!(code(&o), 2);
    let o = run(&["scenario", "fig1e_none", "--set", "no_such_field=1"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn jagged_trace_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    let mut body = String::from("t_s,d_m\n");
    for i in 0..512 {
        let t = if i < 300 { i as f64 * 0.01 } else { i as f64 * 0.01 + 0.004 };
        body.push_str(&format!("{t},{}\n", (i as f64).sin()));
    }
    std::fs::write(&path, body).unwrap();
    let o = run(&["spectrum", path.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("non-uniform sampling"), "{}", stderr(&o));
}

#[test]
fn missing_column_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    std::fs::write(&path, "t_s,x\n0,0\n0.1,1\n").unwrap();
    let o = run(&["spectrum", path.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("d_m"));
}

#[test]
fn invalid_config_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, r#"{"segments": -1}"#).unwrap();
    let o = run(&["simulate", path.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
}

#[test]
fn chain2_scenario_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["--out", dir.path().to_str().unwrap(), "scenario", "fig2_chain2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary = read_json(&dir.path().join("fig2_chain2_summary.json"));
    assert_eq!(summary["outputs"]["enumerate_states.observed_count"], 3);
    assert_eq!(summary["passed"], true);
    assert!(dir.path().join("fig2_chain2_states.csv").exists() || summary["files"].as_array().is_some_and(|f| !f.is_empty()));
}

#[test]
fn failed_property_exits_one() {
    let o = run(&["scenario", "fig4_bend", "--set", "q0=0.5"]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    assert!(stderr(&o).contains("property failed"));
}

#[test]
fn simulate_and_spectrum_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    // A short free-running oscillator from the registry's own config.
    let base = photofeedback::scenarios::descriptor("fig3_oscillator").unwrap().base;
    let mut v = serde_json::to_value(&base).unwrap();
    let obj = v.as_object_mut().unwrap();
    obj.remove("kind");
    obj["integrator"]["t_end"] = Value::from(2.0);
    std::fs::write(&cfg, serde_json::to_string(&v).unwrap()).unwrap();
    let out = dir.path().join("sim");
    let o = run(&["--out", out.to_str().unwrap(), "simulate", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let trace = out.join("trace.csv");
    assert!(trace.exists());
    let o = run(&["--out", out.to_str().unwrap(), "spectrum", trace.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(out.join("spectrum.json").exists());
}
