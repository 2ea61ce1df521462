use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn asymp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_asymp")).args(args).output().expect("binary runs")
}

fn run_config(sub: &str, config: &Path, extra: &[&str]) -> Output {
    let mut args = vec![sub, "--config", config.to_str().unwrap()];
    args.extend_from_slice(extra);
    asymp(&args)
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json output")
}

#[test]
fn analyze_reports_the_five_dimensional_tensor_and_lattice() {
    let v = json(&run_config("analyze", &configs().join("pendulum5.toml"), &[]));
    assert_eq!(v["c_tensor"]["1,2,3"], "a1");
    assert_eq!(v["c_tensor"].as_object().unwrap().len(), 1);
    assert_eq!(v["kernel_lattice"]["basis"], serde_json::json!([[0, 0, 0, 1, 0], [0, 0, 0, 0, 1]]));
    assert_eq!(v["unit_coordinates"], serde_json::json!([4, 5]));
    assert_eq!(v["symplectic"], false);
}

#[test]
fn analyze_reports_the_four_dimensional_kernel() {
    let v = json(&run_config("analyze", &configs().join("kernel4.toml"), &[]));
    assert_eq!(v["c_tensor"]["1,2,4"], "1");
    assert_eq!(v["kernel_lattice"]["basis"], serde_json::json!([[0, 0, 1, 0]]));
}

#[test]
fn classify_accepts_the_pendulum() {
    let v = json(&run_config("classify", &configs().join("pendulum5.toml"), &[]));
    assert_eq!(v["perturbation"]["verdict"], true);
    assert_eq!(v["hamiltonian"]["verdict"], true);
}

#[test]
fn reduce_round_trip_is_consistent() {
    let v = json(&run_config("reduce", &configs().join("pendulum5.toml"), &[]));
    let systems = v["systems"].as_array().unwrap();
    assert_eq!(systems.len(), 2);
    for s in systems {
        assert!(s["consistency_error"].as_f64().unwrap() < 1e-6, "{s}");
        assert_eq!(s["reduced"]["kept"], serde_json::json!([4, 5]));
    }
}

#[test]
fn simulate_writes_a_trajectory_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("traj.csv");
    let o = run_config("simulate", &configs().join("pendulum5.toml"), &["--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,a1,a2,a3,a4,a5,alpha1,alpha2,alpha3,alpha4,alpha5,energy");
    assert_eq!(lines.count(), 101);
}

#[test]
fn empty_epsilon_grid_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let src = fs::read_to_string(configs().join("benchmark.toml")).unwrap();
    let cfg = dir.path().join("empty.toml");
    fs::write(&cfg, src.replace("eps_count = 8", "eps_count = 0")).unwrap();
    assert!(fs::read_to_string(&cfg).unwrap().contains("eps_count = 0"));
    let o = run_config("sweep", &cfg, &["--out", dir.path().join("out").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn bad_expressions_report_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[system]\nn = 2\nk = \"a1^2 + * a2\"\n\n[perturbation]\nterms = []\n").unwrap();
    let o = run_config("classify", &cfg, &[]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 1, column 8") && err.contains("system.k"), "{err}");
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(asymp(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(asymp(&["analyze"]).status.code(), Some(1));
    assert_eq!(asymp(&["--help"]).status.code(), Some(0));
}
