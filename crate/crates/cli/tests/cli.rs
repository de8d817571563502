use std::path::Path;
use std::process::{Command, Output};

use crss::constants::{InequalityParams, ModeIndex};
use crss::harmonics::{sobolev_norm_sq, SpectralFunction, SphereSpace};
use serde_json::Value;

fn crss(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crss")).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn constants_and_eigen() {
    let out = crss(&["constants", "--n", "1", "--s", "2"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!((v["C"].as_f64().unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    assert!((v["theorem"]["dual_ratio"].as_f64().unwrap() - 5.0 * std::f64::consts::PI / 6.0).abs() < 1e-14);

    let out = crss(&["eigen", "--n", "1", "--s", "2", "--jmax", "6"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("j,k,lambda,lambda_mod,lambda_limit"));
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 49);
    let row = rows.iter().find(|r| r[0] == "1" && r[1] == "1").unwrap();
    assert!((row[2].parse::<f64>().unwrap() - 2f64.sqrt() * 2.25).abs() < 1e-14);
    let row = rows.iter().find(|r| r[0] == "3" && r[1] == "0").unwrap();
    assert_eq!(row[4].parse::<f64>().unwrap(), 12.0);
}

#[test]
fn usage_and_parameter_errors_exit_one() {
    assert_eq!(crss(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(crss(&["constants", "--s", "5"]).status.code(), Some(1));
    assert_eq!(crss(&["constants", "--n", "1"]).status.code(), Some(1));
    assert_eq!(crss(&["verify", "bo", "--config", "/nonexistent/config.json"]).status.code(), Some(1));
    assert_eq!(crss(&["--help"]).status.code(), Some(0));
}

#[test]
fn verify_writes_deterministic_reports() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), r#"{"samples": 4, "words": 3, "band_limit": 8}"#);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out_dir in [&a, &b] {
        let out = crss(&["verify", "loghls", "--config", &config, "--out", out_dir.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
        assert!(stdout(&out).lines().all(|l| !l.starts_with("FAIL")));
    }
    let ra = std::fs::read(a.join("report.json")).unwrap();
    assert_eq!(ra, std::fs::read(b.join("report.json")).unwrap());
    let table = std::fs::read_to_string(a.join("tables/loghls_offsets.csv")).unwrap();
    assert_eq!(table.lines().next(), Some("sample,t,spectral,double_integral,offset"));
    let report: Value = serde_json::from_slice(&ra).unwrap();
    assert_eq!(report["rng"], "ChaCha8Rng");
    assert_eq!(report["config"]["samples"], 4);
    assert!(report["provenance"].as_str().unwrap().starts_with("crss "));
}

#[test]
fn tolerance_violation_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), r#"{"samples": 2, "words": 2, "band_limit": 8, "tolerances": {"extremal": 1e-30}}"#);
    let out = crss(&["verify", "fs", "--config", &config, "--out", dir.path().join("r").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).lines().any(|l| l.starts_with("FAIL")));
}

#[test]
fn audit_accepts_seed() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), r#"{"words": 2, "band_limit": 8, "audit_band": 12, "s_values": [2.0]}"#);
    let out_dir = dir.path().join("audit");
    let out = crss(&["audit", "invariance", "--seed", "11", "--config", &config, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let report: Value = serde_json::from_slice(&std::fs::read(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["seed"], 11);
}

#[test]
fn distance_from_spectral_and_grid_input() {
    let dir = tempfile::tempdir().unwrap();
    let band = 6;
    let params = InequalityParams::new(1, 2.0).unwrap();
    let phi = SpectralFunction::real_mode(band, ModeIndex::new(2, 0), 0).unwrap();
    let phi = phi.scale(0.05 / sobolev_norm_sq(&phi, &params).sqrt());
    let f = SpectralFunction::constant(band, 1.0).add(&phi).unwrap();
    let json = dir.path().join("f.json");
    f.write_json(&json).unwrap();
    let csv = dir.path().join("f.csv");
    SphereSpace::new(band).unwrap().synthesize(&f).unwrap().write_csv(&csv).unwrap();
    let band_arg = band.to_string();
    for input in [&json, &csv] {
        let out = crss(&["distance", "--input", input.to_str().unwrap(), "--metric", "sobolev", "--band", &band_arg, "--starts", "2"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
        assert!((v["distance"].as_f64().unwrap() / 0.05 - 1.0).abs() < 0.05, "{v}");
        assert_eq!(v["converged"], true);
    }
    let bad = dir.path().join("f.txt");
    std::fs::write(&bad, "x").unwrap();
    assert_eq!(crss(&["distance", "--input", bad.to_str().unwrap(), "--metric", "lp"]).status.code(), Some(1));
}
