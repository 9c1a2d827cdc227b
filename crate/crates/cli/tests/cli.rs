use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.toml"))
}

fn wgdelay(args: &[&str], env_dir: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_wgdelay"));
    cmd.args(args).env_remove("WGDELAY_OUTPUT_DIR");
    if let Some(d) = env_dir {
        cmd.env("WGDELAY_OUTPUT_DIR", d);
    }
    cmd.output().unwrap()
}

fn error_report(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {}", String::from_utf8_lossy(&out.stderr)))
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header.iter().position(|h| *h == name).unwrap_or_else(|| panic!("no column {name} in {header:?}"));
    lines.map(|l| l.split(',').nth(k).unwrap().parse().unwrap()).collect()
}

#[test]
fn verify_free_suite_writes_report_to_env_dir() {
    let dir = tempfile::tempdir().unwrap();
    let out = wgdelay(&["verify", "--suite", "free"], Some(dir.path()));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("verify.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["criteria"].as_array().unwrap().len(), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("[PASS] criterion 1"));
}

#[test]
fn smatrix_is_unitary_and_reproducible() {
    let path = scenario("square_well");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let run = |dir: &Path, threads: Option<&str>| {
        let mut args = vec!["smatrix", "--scenario", path.to_str().unwrap(), "--output", dir.to_str().unwrap()];
        if let Some(t) = threads {
            args.extend(["--threads", t]);
        }
        let out = wgdelay(&args, None);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    };
    run(a.path(), None);
    run(b.path(), Some("1"));
    let residual = column(&a.path().join("residuals.csv"), "unitarity_residual");
    assert!(!residual.is_empty());
    assert!(residual.iter().all(|&r| r <= 1e-6), "max {:e}", residual.iter().cloned().fold(0.0, f64::max));
    for f in ["smatrix.csv", "ew_delay.csv", "residuals.csv"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f} differs");
    }
    let summary: Value = serde_json::from_str(&fs::read_to_string(a.path().join("smatrix.json")).unwrap()).unwrap();
    assert!(summary.is_object());
}

#[test]
fn oversized_radius_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario("free");
    let out = wgdelay(&["delay", "--scenario", path.to_str().unwrap(), "--r-max", "60", "--output", dir.path().to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(2));
    let report = error_report(&out);
    assert_eq!(report["command"], "delay");
    assert_eq!(report["error"]["kind"], "config");
    assert!(report["error"]["message"].as_str().unwrap().contains("r_max <= X/2"), "{report}");
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn missing_scenario_names_the_path() {
    let out = wgdelay(&["modes", "--scenario", "/nonexistent/x.toml"], None);
    assert_eq!(out.status.code(), Some(1));
    let report = error_report(&out);
    assert!(report["error"]["message"].as_str().unwrap().contains("/nonexistent/x.toml"));
}

#[test]
fn usage_errors_are_reported_as_json() {
    let out = wgdelay(&["frobnicate"], None);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_report(&out)["error"]["kind"], "usage");
}

#[test]
fn modes_writes_coupling_table_and_output_flag_wins() {
    let env_dir = tempfile::tempdir().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = scenario("two_channel");
    let out = wgdelay(&["modes", "--scenario", path.to_str().unwrap(), "--output", dir.path().to_str().unwrap()], Some(env_dir.path()));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("coupling.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("x,alpha,beta,value"));
    assert!(dir.path().join("thresholds.csv").exists() && dir.path().join("modes.json").exists());
    assert_eq!(fs::read_dir(env_dir.path()).unwrap().count(), 0);
}

#[test]
fn free_sojourn_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario("free");
    let out = wgdelay(&["sojourn", "--scenario", path.to_str().unwrap(), "--output", dir.path().to_str().unwrap()], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("sojourn_free.csv")).unwrap();
    let header: Vec<String> = text.lines().next().unwrap().split(',').map(String::from).collect();
    assert_eq!(header[0], "r");
    assert!(header.len() >= 3, "{header:?}");
    let computed = column(&dir.path().join("sojourn_free.csv"), &header[1]);
    let oracle = column(&dir.path().join("sojourn_free.csv"), &header[2]);
    for (c, o) in computed.iter().zip(&oracle) {
        assert!((c - o).abs() <= 1e-6 * o, "{c} vs {o}");
    }
}
