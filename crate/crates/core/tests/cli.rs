use std::path::Path;
use std::process::Command;

fn hwv(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_hwv"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .unwrap()
}

#[test]
fn run_preset_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = hwv(&["run", "--preset", "constrained", "--seed", "4", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.starts_with("1000 cycles (seed 4): mean improvement"), "{stdout}");
    for f in ["weights.csv", "revenue.csv", "cdf.csv", "summary.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["preset"], "constrained");
    assert_eq!(summary["seed"], 4);
}

#[test]
fn run_with_config_and_policy_files() {
    let dir = tempfile::tempdir().unwrap();
    let presets = Path::new(env!("CARGO_MANIFEST_DIR")).join("presets");
    let cfg = dir.path().join("short.config.json");
    let mut config: serde_json::Value =
        serde_json::from_slice(&std::fs::read(presets.join("bts-ap.config.json")).unwrap()).unwrap();
    config["n_cycles"] = 25.into();
    std::fs::write(&cfg, serde_json::to_vec(&config).unwrap()).unwrap();
    let out = dir.path().join("out");
    let o = hwv(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--policy",
        presets.join("unconstrained.policy.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let revenue = std::fs::read_to_string(out.join("revenue.csv")).unwrap();
    assert_eq!(revenue.lines().count(), 26);
}

#[test]
fn run_without_policy_source_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = hwv(&["run", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no experiment config"));
    let o = hwv(&["run", "--preset", "bogus", "--out", dir.path().to_str().unwrap()]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown preset 'bogus'"));
}

#[test]
fn validate_reports_verdict() {
    let presets = Path::new(env!("CARGO_MANIFEST_DIR")).join("presets");
    let o = hwv(&["validate", presets.join("constrained.policy.json").to_str().unwrap()]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("feasible (version 1)"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    let mut doc: serde_json::Value =
        serde_json::from_slice(&std::fs::read(presets.join("constrained.policy.json")).unwrap()).unwrap();
    doc["minima"] = serde_json::json!([
        {"substrate": 1, "slice": 0, "airtime": 0.7},
        {"substrate": 1, "slice": 1, "airtime": 0.6}
    ]);
    std::fs::write(&bad, serde_json::to_vec(&doc).unwrap()).unwrap();
    let o = hwv(&["validate", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("infeasible") && stdout.contains("ap1"), "{stdout}");
}

#[test]
fn preset_listing_and_export() {
    let o = hwv(&["preset"]);
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 3);
    let o = hwv(&["preset", "priced", "--policy"]);
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["pricing_mode"], "weighted-revenue");
}
