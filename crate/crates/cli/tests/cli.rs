use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const HALF_PI: f64 = std::f64::consts::FRAC_PI_2;

fn chronos(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chronos"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env_remove("CHRONOS_SDP_TOL")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

/// Raw text of the first `"key": <number>` in a pretty-printed file.
fn raw_number(p: &Path, key: &str) -> String {
    let text = std::fs::read_to_string(p).unwrap();
    let needle = format!("\"{key}\": ");
    text.lines()
        .filter_map(|l| l.trim().strip_prefix(&needle))
        .map(|v| v.trim_end_matches(',').to_string())
        .find(|v| v.parse::<f64>().is_ok())
        .unwrap_or_else(|| panic!("no numeric {key} in {}", p.display()))
}

fn orthogonal() -> String {
    format!(
        r#"{{"scenario": {{"atoms": 1, "queries": 1,
            "prior": {{"kind": "discrete", "params": {{"points": [{m}, {p}], "weights": [0.5, 0.5]}}}},
            "cost": "quadratic", "estimates": [{m}, {p}]}},
          "stages": 1}}"#,
        m = -HALF_PI,
        p = HALF_PI
    )
}

fn gaussian(extra: &str) -> String {
    format!(
        r#"{{"scenario": {{"atoms": 1, "queries": 1,
            "prior": {{"kind": "gaussian", "params": {{"mean": 0.0, "std": 1.0}}}},
            "cost": "quadratic", "d": 7, "estimates": {{"count": 6, "method": "optimal_width"}},
            "seed": 3, "samples": 4{extra}}}}}"#
    )
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let malformed = write(d, "bad.json", "{\"scenario\": ");
    let unknown = write(d, "unknown.json", &gaussian(r#", "colour": "red""#));
    let good = write(d, "good.json", &gaussian(""));
    let missing = d.join("missing.json");
    let cases: Vec<Vec<&str>> = vec![
        vec!["solve", "--config", malformed.to_str().unwrap()],
        vec!["solve", "--config", unknown.to_str().unwrap()],
        vec!["solve"],
        vec!["solve", "--config", good.to_str().unwrap(), "--preset", "tableI"],
        vec!["bounds", "--preset", "tableIII"],
        vec!["solve", "--config", missing.to_str().unwrap()],
    ];
    for args in cases {
        let out = chronos(d, &args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let out = Command::new(env!("CARGO_BIN_EXE_chronos"))
        .args(["solve", "--config", good.to_str().unwrap(), "--out", d.to_str().unwrap()])
        .env("CHRONOS_SDP_TOL", "-1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn orthogonal_states_cost_nothing_and_one_stage_chain_matches_solve() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write(d, "orth.json", &orthogonal());
    for cmd in ["solve", "chain"] {
        let out = chronos(d, &[cmd, "--config", cfg.to_str().unwrap()]);
        assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let solve = read_json(&d.join("solve-orth.json"));
    let cost = solve["cost"].as_f64().unwrap();
    assert!(cost.abs() <= 1e-7, "cost {cost}");
    assert_eq!(
        raw_number(&d.join("solve-orth.json"), "cost"),
        raw_number(&d.join("chain-orth.json"), "total_cost")
    );
}

#[test]
fn echoed_config_reproduces_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write(d, "g.json", &gaussian(""));
    let out = chronos(d, &["bounds", "--config", cfg.to_str().unwrap(), "--k", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let echo = d.join("bounds-g.config.json");
    let first = read_json(&d.join("bounds-g.json"));
    assert_eq!(read_json(&echo)["scenario"]["samples"], 3);

    let rerun = d.join("rerun");
    let out = chronos(&rerun, &["bounds", "--config", echo.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let second = read_json(&rerun.join("bounds-g.json"));
    for key in ["c_l", "s_l", "c_u"] {
        let (a, b) = (first["bounds"][key].as_f64().unwrap(), second["bounds"][key].as_f64().unwrap());
        assert!((a - b).abs() <= 1e-7, "{key}: {a} vs {b}");
    }
    let csv = std::fs::read_to_string(rerun.join("bounds-g.csv")).unwrap();
    assert!(csv.starts_with("prior_sigma,N,t_f,d,m,k,c_l,s_l,c_u,eps_q,seed,wall_time_s"));
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn tolerance_env_is_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write(d, "g.json", &gaussian(""));
    let out = Command::new(env!("CARGO_BIN_EXE_chronos"))
        .args(["solve", "--config", cfg.to_str().unwrap(), "--out", d.to_str().unwrap()])
        .env("CHRONOS_SDP_TOL", "1e-6")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let echo = read_json(&d.join("solve-g.config.json"));
    assert_eq!(echo["scenario"]["tolerances"]["gap_tol"].as_f64(), Some(1e-6));
}

#[test]
fn iteration_limit_is_a_solver_failure() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write(d, "tight.json", &gaussian(r#", "tolerances": {"max_iter": 1}"#));
    let out = chronos(d, &["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(d.join("solve-tight.failure.json").exists());
    assert!(d.join("solve-tight.sdp.txt").exists());
    let failure = read_json(&d.join("solve-tight.failure.json"));
    assert!(failure.is_object());
}

#[test]
fn presets_are_listed() {
    let dir = tempfile::tempdir().unwrap();
    let out = chronos(dir.path(), &["presets"]);
    assert!(out.status.success());
    let names = String::from_utf8(out.stdout).unwrap();
    for n in ["tableI", "tableII", "tableII-N2-t2", "fig2", "fig4", "fig6"] {
        assert!(names.lines().any(|l| l == n), "missing {n}");
    }
}
