use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn run(args: &[&str], config: Option<&str>, out: &Path) -> i32 {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_bondlimit"));
    cmd.args(args).arg("--out").arg(out);
    if let Some(text) = config {
        let path = out.with_extension("json");
        fs::write(&path, text).unwrap();
        cmd.arg("--config").arg(path);
    }
    cmd.output().unwrap().status.code().unwrap()
}

fn results(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("results.json")).unwrap()).unwrap()
}

#[test]
fn two_point_transport() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("mmot");
    let config = r#"{"rho": {"type": "discrete", "points": [[0,0,0],[2,0,0]], "weights": [0.5,0.5]}, "N": 2}"#;
    assert_eq!(run(&["mmot"], Some(config), &out), 0);
    let doc = results(&out);
    assert_eq!(doc["status"], "ok");
    assert!(doc["tolerances"]["tol_mass"].is_number());
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(csv.starts_with("tuple,weight"));
    assert!(fs::read_to_string(out.join("run.log")).unwrap().contains("exit code 0"));
}

#[test]
fn unknown_field_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bad");
    let config = r#"{"rho": {"type": "discrete", "points": [[0,0,0]], "weights": [1.0]}, "N": 2, "bogus": 1}"#;
    assert_eq!(run(&["mmot"], Some(config), &out), 1);
    let doc = results(&out);
    assert_eq!(doc["status"], "error");
    assert_eq!(doc["exit_code"], 1);
    assert!(doc["error"].as_str().unwrap().contains("bogus"));
}

#[test]
fn missing_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["partial"], None, &dir.path().join("none")), 1);
}

#[test]
fn invalid_measure_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("mass");
    let config = r#"{"rho": {"type": "discrete", "points": [[0,0,0],[1,0,0]], "weights": [0.8,0.7]}, "N": 2}"#;
    assert_eq!(run(&["mmot"], Some(config), &out), 1);
}

#[test]
fn staylocal_reports_clusters() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("stay");
    let config = r#"{"rho": {"type": "discrete", "points": [[0,0,0],[0.1,0,0],[10,0,0],[10,0.1,0]], "weights": [0.25,0.25,0.25,0.25]}, "delta": 0.1, "N": 2}"#;
    assert_eq!(run(&["staylocal"], Some(config), &out), 0);
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("cluster,mass,within,expected"));
}
