use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn run(dir: &Path, config: &Value) -> Output {
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(config).unwrap()).unwrap();
    Command::new(env!("CARGO_BIN_EXE_cpctl")).arg(&path).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn heat_system() -> Value {
    json!({
        "dimension": 1, "a22": "-1", "domain": {"lo": [0], "hi": [3.141592653589793]}, "horizon": 0.5,
        "control_window": {"lo": [0, 1], "hi": [0.5, 2]}
    })
}

fn blended() -> Value {
    let pi = std::f64::consts::PI;
    json!({
        "domain": {"lo": [0], "hi": [pi]},
        "omega": {"lo": [0.45 * pi], "hi": [0.55 * pi]},
        "omega1": {"lo": [0.4 * pi], "hi": [0.6 * pi]},
        "omega2": {"lo": [0.3 * pi], "hi": [0.7 * pi]},
        "delta": 0.1
    })
}

#[test]
fn empty_config_lists_required_fields() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(tmp.path(), &json!({}));
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("command: required") && err.contains("output.dir: required"), "{err}");
}

#[test]
fn every_failing_field_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let mut sys = heat_system();
    sys["a22"] = json!("sin(");
    sys["horizon"] = json!(-1.0);
    let o = run(
        tmp.path(),
        &json!({"command": "hum-sweep", "system": sys, "numeric": {"cells": [20], "theta": 2.0},
                "output": {"dir": tmp.path().join("out")}}),
    );
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    for field in ["system.a22", "system.horizon", "numeric.theta", "numeric.steps", "numeric.initial", "numeric.epsilons"] {
        assert!(err.contains(field), "missing {field} in\n{err}");
    }
}

#[test]
fn malformed_json_and_unknown_command_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.json");
    fs::write(&path, "{ not json").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_cpctl")).arg(&path).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = run(tmp.path(), &json!({"command": "solve", "output": {"dir": "x"}}));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown \"solve\""));
}

#[test]
fn counterexample_writes_samples_and_witness() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("ce");
    let o = run(tmp.path(), &json!({"command": "counterexample", "output": {"dir": out}}));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let line = stdout(&o);
    assert!(line.contains("max|φ| on ω"), "{line}");
    let max_phi: f64 = line.split("max|φ| on ω = ").nth(1).unwrap().split(',').next().unwrap().parse().unwrap();
    assert!(max_phi <= 1e-8);
    for (f, col) in [("psi.csv", "psi"), ("phi.csv", "phi"), ("a.csv", "a")] {
        let text = fs::read_to_string(out.join(f)).unwrap();
        assert_eq!(text.lines().next().unwrap(), format!("x [length],{col} [1]"));
        assert_eq!(text.lines().count(), 1001);
    }
    let w: Value = serde_json::from_str(&fs::read_to_string(out.join("witness.json")).unwrap()).unwrap();
    assert_eq!(w["s"], json!(9.0));
}

#[test]
fn blended_potential_fails_the_condition() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(tmp.path(), &json!({"command": "check-condition", "blended": blended(), "output": {"dir": tmp.path()}}));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("check-condition: fails (membership)"), "{}", stdout(&o));
    assert!(tmp.path().join("condition.json").exists());
}

#[test]
fn fattorini_single_and_coupled() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(
        tmp.path(),
        &json!({"command": "fattorini", "blended": blended(), "fattorini": {"mode": "single"},
                "numeric": {"cells": [200]}, "output": {"dir": tmp.path()}}),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("fattorini: obstructed"), "{}", stdout(&o));

    let o = run(
        tmp.path(),
        &json!({"command": "fattorini", "fattorini": {"mode": "coupled", "pairs": 12, "vanish_tol": 1e-10},
                "counterexample": {"eps_blend": 0.7}, "numeric": {"cells": [200]}, "output": {"dir": tmp.path()}}),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("fattorini: obstructed"), "{}", stdout(&o));
    let rep: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("fattorini.json")).unwrap()).unwrap();
    assert_eq!(rep["mode"], json!("coupled"));
}

#[test]
fn eliminate_reports_non_solvable_as_domain_error() {
    let tmp = tempfile::tempdir().unwrap();
    let sys = json!({"dimension": 2, "a22": "-1", "domain": {"lo": [0, 0], "hi": [2, 2]}, "horizon": 1,
                     "control_window": {"lo": [0.1, 0.5, 0.5], "hi": [0.9, 1.5, 1.5]}});
    let o = run(tmp.path(), &json!({"command": "eliminate", "system": sys, "output": {"dir": tmp.path()}}));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("non-solvable"), "{}", stderr(&o));

    let mut sys = sys;
    sys["a22"] = json!("-x1*x2");
    let o = run(tmp.path(), &json!({"command": "eliminate", "system": sys, "output": {"dir": tmp.path()}}));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("eliminate: solvable"));
    let rep: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("elimination.json")).unwrap()).unwrap();
    assert!(rep["solver"]["identity_residual"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn simulate_is_deterministic_with_unit_headers() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = |dir: &Path| {
        json!({"command": "simulate", "system": heat_system(),
               "numeric": {"cells": [40], "steps": 20, "initial": ["sin(x1)", "0.5*sin(2*x1)"]},
               "output": {"dir": dir}})
    };
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        let o = run(tmp.path(), &cfg(d));
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let ta = fs::read(a.join("trajectory.csv")).unwrap();
    assert_eq!(ta, fs::read(b.join("trajectory.csv")).unwrap());
    let text = String::from_utf8(ta).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t [time],x1 [length],y1 [state],y2 [state],u [control]");
    assert_eq!(text.lines().count(), 1 + 21 * 39);
}

#[test]
fn hum_sweep_with_overridden_steps() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("hum.json");
    let cfg = json!({"command": "hum-sweep", "system": heat_system(),
                     "numeric": {"cells": [40], "steps": 5, "initial": ["sin(x1)", "0"], "epsilons": [1e-2, 1e-3, 1e-4]},
                     "output": {"dir": tmp.path().join("ignored")}});
    fs::write(&path, cfg.to_string()).unwrap();
    let out = tmp.path().join("sweep");
    let o = Command::new(env!("CARGO_BIN_EXE_cpctl"))
        .arg(&path)
        .args(["--steps", "30", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("hum-sweep: slope"));
    let text = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert!(text.starts_with("epsilon [1],terminal_norm"));
    assert_eq!(text.lines().count(), 4);
    assert!(!tmp.path().join("ignored").exists());
}

#[test]
fn assembly_and_normalize_run() {
    let tmp = tempfile::tempdir().unwrap();
    let sys = json!({"dimension": 1, "a22": "-x1", "a11": "x1", "g22": ["0.5"],
                     "domain": {"lo": [0], "hi": [1]}, "horizon": 1,
                     "control_window": {"lo": [0.02, 0.05], "hi": [0.98, 0.95]}});
    let o = run(tmp.path(), &json!({"command": "assembly", "system": sys, "numeric": {"cells": [32, 64]},
                                    "output": {"dir": tmp.path()}}));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("support inside ω_T: true"), "{}", stdout(&o));
    assert_eq!(fs::read_to_string(tmp.path().join("assembly.csv")).unwrap().lines().count(), 3);

    let sys = json!({"dimension": 2, "g21": ["-1", "0.3*sin(x1)"], "a21": "0.4 + 0.2*x2", "a22": "x1",
                     "domain": {"lo": [0, 0], "hi": [2, 2]}, "horizon": 1,
                     "control_window": {"lo": [0, 0.5, 0.5], "hi": [1, 1.5, 1.5]}});
    let o = run(tmp.path(), &json!({"command": "normalize", "system": sys, "output": {"dir": tmp.path()}}));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rep: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("normalized.json")).unwrap()).unwrap();
    assert!(rep["coupling_deviation"].as_f64().unwrap() <= 1e-6);
    assert!(rep["a21_residual"].as_f64().unwrap() <= 1e-8);
    assert!(fs::read_to_string(tmp.path().join("flow.csv")).unwrap().starts_with("t [time],s [length]"));
}
