use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn neu(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_neu")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn regression_csv(dir: &Path) -> PathBuf {
    let mut body = String::from("a,b,y\n");
    for i in 0..40 {
        let a = (i as f64 * 0.37).sin();
        let b = (i as f64 * 0.91).cos();
        let noise = ((i * 7919) % 13) as f64 / 130.0 - 0.05;
        body.push_str(&format!("{a},{b},{}\n", 1.0 + 2.0 * a - b + noise));
    }
    write(dir, "data.csv", &body)
}

fn coefficients(dir: &Path) -> Vec<f64> {
    let text = fs::read_to_string(dir.join("coefficients.csv")).unwrap();
    text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}

#[test]
fn urp_check_on_identical_points_reports_zeros() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "p.csv", "x,y\n0.1,0.2\n0.7,0.4\n0.3,0.9\n");
    let out = neu(&["urp-check", "--sources", "p.csv", "--targets", "p.csv", "--out", "o"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("o/report.json")).unwrap()).unwrap();
    assert_eq!(report["max_endpoint_error"], 0.0);
    assert_eq!(report["max_fixed_drift"], 0.0);
    let points = fs::read_to_string(tmp.path().join("o/points.csv")).unwrap();
    assert!(points.lines().skip(1).all(|l| l.ends_with(",0")));
}

#[test]
fn urp_check_meets_tolerances() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "s.csv", "x,y\n0.1,0.2\n0.5,0.5\n0.9,0.1\n");
    write(tmp.path(), "t.csv", "x,y\n0.3,0.35\n0.6,0.7\n0.7,0.2\n");
    write(tmp.path(), "f.csv", "x,y\n0.8,0.8\n0.2,0.8\n0.05,0.05\n");
    let out = neu(
        &["urp-check", "--sources", "s.csv", "--targets", "t.csv", "--fixed", "f.csv", "--out", "o"],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("o/report.json")).unwrap()).unwrap();
    assert!(report["max_endpoint_error"].as_f64().unwrap() < 1e-7);
    assert!(report["max_fixed_drift"].as_f64().unwrap() < 1e-9);
    assert!(tmp.path().join("o/chain.json").exists());
}

#[test]
fn enet_without_penalty_matches_ols() {
    let tmp = TempDir::new().unwrap();
    regression_csv(tmp.path());
    assert!(neu(&["fit", "ols", "--data", "data.csv", "--out", "ols"], tmp.path()).status.success());
    assert!(neu(&["fit", "enet", "--lambda", "0", "--data", "data.csv", "--out", "enet"], tmp.path()).status.success());
    let a = coefficients(&tmp.path().join("ols"));
    let b = coefficients(&tmp.path().join("enet"));
    assert_eq!(a.len(), 3);
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-8, "{x} vs {y}");
    }
}

#[test]
fn sim_study_is_byte_identical() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "c.json", r#"{"study":{"neu":{"max_iters":4,"proposals_per_iter":8}},"bca":{"resamples":200}}"#);
    let args = |out: &'static str| {
        vec!["sim-study", "--target", "m1", "--sigma", "0.1", "--seed", "7", "--config", "c.json", "--out", out]
    };
    assert!(neu(&args("a"), tmp.path()).status.success());
    assert!(neu(&args("b"), tmp.path()).status.success());
    let a = files(&tmp.path().join("a"));
    assert_eq!(a.iter().map(|f| f.0.as_str()).collect::<Vec<_>>(), ["manifest.json", "study.csv", "summary.csv"]);
    assert_eq!(a, files(&tmp.path().join("b")));
}

#[test]
fn neu_fit_is_byte_identical_in_json() {
    let tmp = TempDir::new().unwrap();
    regression_csv(tmp.path());
    let args = |out: &'static str| {
        vec!["--format", "json", "fit", "neu-ols", "--data", "data.csv", "--max-iters", "4", "--proposals", "8", "--out", out]
    };
    assert!(neu(&args("a"), tmp.path()).status.success());
    assert!(neu(&args("b"), tmp.path()).status.success());
    assert_eq!(files(&tmp.path().join("a")), files(&tmp.path().join("b")));
}

#[test]
fn config_overrides_flags_and_is_echoed() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "c.json", r#"{"study":{"k_max":2}}"#);
    let out = neu(&["pca", "--k-max", "4", "--config", "c.json", "--out", "o"], tmp.path());
    assert!(out.status.success());
    let table = fs::read_to_string(tmp.path().join("o/pca.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("o/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["study"]["k_max"], 2);
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn demo_chain_roundtrips() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "p.csv", "x,y,z\n0.1,0.2,0.3\n0.7,0.4,0.1\n0.3,0.9,0.5\n0.5,0.5,0.5\n");
    assert!(neu(&["demo", "reconfigure", "--points", "p.csv", "--out", "fwd"], tmp.path()).status.success());
    let back = neu(
        &["demo", "reconfigure", "--points", "fwd/points.csv", "--chain", "fwd/chain.json", "--invert", "--out", "back"],
        tmp.path(),
    );
    assert!(back.status.success());
    let original = fs::read_to_string(tmp.path().join("p.csv")).unwrap();
    let restored = fs::read_to_string(tmp.path().join("back/points.csv")).unwrap();
    for (a, b) in original.lines().skip(1).zip(restored.lines().skip(1)) {
        for (x, y) in a.split(',').zip(b.split(',')) {
            assert!((x.parse::<f64>().unwrap() - y.parse::<f64>().unwrap()).abs() < 1e-10);
        }
    }
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let out = neu(&["fit", "ols", "--bogus"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(neu(&["no-such-command"], tmp.path()).status.code(), Some(2));
}

#[test]
fn failures_exit_one_and_write_nothing() {
    let tmp = TempDir::new().unwrap();
    let out = neu(&["fit", "ols", "--data", "missing.csv", "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
    assert!(!tmp.path().join("o").exists());

    write(tmp.path(), "s.csv", "x,y\n0.1,0.2\n0.5,0.5\n");
    write(tmp.path(), "t.csv", "x,y\n0.1,0.2\n");
    let out = neu(&["urp-check", "--sources", "s.csv", "--targets", "t.csv", "--out", "u"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(!tmp.path().join("u").exists());
}

#[test]
fn every_subcommand_has_help() {
    let tmp = TempDir::new().unwrap();
    for cmd in [
        vec!["demo", "reconfigure"],
        vec!["fit"],
        vec!["pca"],
        vec!["neu-pca"],
        vec!["sim-study"],
        vec!["backtest"],
        vec!["urp-check"],
    ] {
        let mut args = cmd.clone();
        args.push("--help");
        let out = neu(&args, tmp.path());
        assert!(out.status.success());
        let text = String::from_utf8_lossy(&out.stdout);
        assert!(text.contains("--seed") && text.contains("--out"), "{cmd:?}");
    }
}
