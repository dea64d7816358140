use std::path::Path;
use std::process::{Command, Output};

fn conecal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_conecal"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn threshold_writes_reports_and_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = conecal(&["threshold", "--n", "3,4,7", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = report(dir.path());
    assert_eq!(rep["schema_version"], 1);
    assert!(!rep["records"].as_array().unwrap().is_empty());
    let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(csv.starts_with("check,n,lambda,gamma,statistic,tolerance,order,pass,seed,detail\n"));
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS threshold_empty_range"));
}

#[test]
fn injected_fault_fails_with_a_pinpointed_record() {
    let dir = tempfile::tempdir().unwrap();
    let out = conecal(&[
        "identities", "--n", "4", "--lambda", "0.5", "--samples", "100",
        "--inject-fault", "1e-6", "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("PASS metric_det"));
    assert!(stdout.contains("FAIL drho_norm"));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "seed = 7\nn = [5]\nlambda = [\"bar/2\"]\n[samples]\nidentities = 50\nhodge = 3\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = conecal(&[
        "identities", "--config", cfg.to_str().unwrap(), "--seed", "9",
        "--out", out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = report(&out_dir);
    assert_eq!(rep["config"]["seed"], 9);
    assert_eq!(rep["config"]["n"], serde_json::json!([5]));
    assert_eq!(rep["config"]["samples"]["identities"], 50);
    assert_eq!(rep["config"]["samples"]["hodge"], 3);
    assert_eq!(rep["records"][0]["seed"], 9);
}

#[test]
fn bad_config_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "sead = 7\n").unwrap();
    let out = conecal(&["threshold", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sead"));
    let out = conecal(&["verify", "--lambda", "bar+1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn defaults_round_trip_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = conecal(&["defaults"]);
    assert_eq!(out.status.code(), Some(0));
    let cfg = dir.path().join("d.toml");
    std::fs::write(&cfg, &out.stdout).unwrap();
    let out = conecal(&["threshold", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str| {
        let d = dir.path().join(sub);
        let out = conecal(&[
            "verify", "--n", "4", "--lambda", "bar", "--samples", "300",
            "--out", d.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
        std::fs::read(d.join("report.csv")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn mincut_reports_instability_and_consistency() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("net.txt");
    let out = conecal(&[
        "mincut", "--n", "2", "--lambda", "1", "--step", "0.02", "--probe", "0.02",
        "--dump", dump.to_str().unwrap(), "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS mincut_below_plane"));
    assert!(std::fs::read_to_string(&dump).unwrap().starts_with("# nodes "));

    let out = conecal(&[
        "mincut", "--n", "4", "--lambda", "0.3", "--step", "0.05", "--probe", "0.1",
        "--stencil", "nearest", "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS mincut_vs_plane"));
}
