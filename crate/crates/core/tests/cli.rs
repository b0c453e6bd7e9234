use std::path::{Path, PathBuf};
use std::process::Command;

use koopman_roa::empirical::read_metrics_csv;
use koopman_roa::roa::Certificate;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_koopman-roa"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn certify(name: &str, dir: &Path) -> i32 {
    bin().arg("certify").arg(config(name)).arg("--out-dir").arg(dir).status().unwrap().code().unwrap()
}

fn read_cert(path: &Path) -> Certificate {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn certify_example1_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(certify("example1-sos.json", dir.path()), 0);
    let cert = read_cert(&dir.path().join("example1-sos.certificate.json"));
    assert!(cert.certified);
    assert_eq!(cert.gamma1, 0.0);

    let mut values = csv::Reader::from_path(dir.path().join("example1-sos.v.csv")).unwrap();
    assert_eq!(values.headers().unwrap(), vec!["x", "y", "v"]);
    assert_eq!(values.records().count(), 400 * 400);

    let mut contours = csv::Reader::from_path(dir.path().join("example1-sos.contours.csv")).unwrap();
    assert_eq!(contours.headers().unwrap(), vec!["curve_id", "x", "y"]);
    let mut n = 0;
    for rec in contours.records() {
        let rec = rec.unwrap();
        assert!(rec[0].starts_with("gamma2:"));
        let x: f64 = rec[1].parse().unwrap();
        let y: f64 = rec[2].parse().unwrap();
        let v = cert.v_original_at(&[x, y]);
        assert!((v - cert.gamma2).abs() < 0.02 * cert.gamma2, "{v} vs {}", cert.gamma2);
        n += 1;
    }
    assert!(n > 100);
}

#[test]
fn certify_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(certify("example1-sos.json", a.path()), 0);
    assert_eq!(certify("example1-sos.json", b.path()), 0);
    let read = |d: &Path| std::fs::read(d.join("example1-sos.certificate.json")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn certify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(certify("example1-infeasible.json", dir.path()), 2);
    assert!(!read_cert(&dir.path().join("example1-infeasible.certificate.json")).certified);

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"system": {"builtin": {"name": "example1"}}, "basis": {"kind": "monomial", "degree": "three"}}"#).unwrap();
    let out = bin().arg("certify").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("basis"));
    assert_eq!(bin().arg("certify").arg(dir.path().join("missing.json")).status().unwrap().code(), Some(1));
}

#[test]
fn grid_certify_writes_cells() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(certify("example1-grid.json", dir.path()), 0);
    let mut cells = csv::Reader::from_path(dir.path().join("example1-grid.grid.csv")).unwrap();
    assert_eq!(cells.headers().unwrap(), vec!["level", "status", "side_0", "side_1", "x_0", "x_1"]);
    assert!(cells.records().any(|r| &r.unwrap()[1] == "validated"));
    let cert = read_cert(&dir.path().join("example1-grid.certificate.json"));
    assert!(cert.gamma1 > 0.0);
    let contours = std::fs::read_to_string(dir.path().join("example1-grid.contours.csv")).unwrap();
    assert!(contours.contains("gamma1:0") && contours.contains("gamma2:0"));
}

#[test]
fn combine_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(certify("example1-sos.json", dir.path()), 0);
    let path = dir.path().join("example1-sos.certificate.json");
    let cert = read_cert(&path);
    let combine = |paths: &[&Path], out: &Path| {
        bin().arg("combine").args(paths).arg("--out").arg(out).arg("--samples").arg("2000").status().unwrap().code().unwrap()
    };

    let single = dir.path().join("single.json");
    assert_eq!(combine(&[&path], &single), 0);
    let text = std::fs::read_to_string(&single).unwrap();
    assert!(text.contains("\"nesting_verified\": true"));

    let mut inner = cert.clone();
    inner.gamma1 = 0.5 * cert.gamma2;
    let mut outer = cert.clone();
    outer.gamma2 = 0.25 * cert.gamma2;
    let (pa, pb) = (dir.path().join("a.json"), dir.path().join("b.json"));
    std::fs::write(&pa, serde_json::to_string(&inner).unwrap()).unwrap();
    std::fs::write(&pb, serde_json::to_string(&outer).unwrap()).unwrap();
    let report = dir.path().join("violated.json");
    assert_eq!(combine(&[&pa, &pb], &report), 2);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["witness"].as_array().unwrap().len(), 2);

    let mut other = cert.clone();
    other.map.scale = vec![1.0, 1.0];
    let pc = dir.path().join("c.json");
    std::fs::write(&pc, serde_json::to_string(&other).unwrap()).unwrap();
    assert_eq!(combine(&[&path, &pc], &dir.path().join("x.json")), 1);
    assert_eq!(combine(&[&dir.path().join("nope.json")], &dir.path().join("y.json")), 1);
}

#[test]
fn empirical_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let run = |json: &str, name: &str| {
        let p = dir.path().join(format!("{name}.json"));
        std::fs::write(&p, json).unwrap();
        let code = bin().arg("empirical").arg(&p).arg("--out-dir").arg(dir.path()).status().unwrap().code().unwrap();
        (code, dir.path().join(format!("{name}.metrics.csv")))
    };

    let (code, csv_path) = run(r#"{"dimensions": []}"#, "empty");
    assert_eq!(code, 0);
    assert!(read_metrics_csv(&csv_path).unwrap().is_empty());

    let (code, csv_path) = run(
        r#"{"dimensions": [4, 5, 6], "samples": 100, "trials": 2, "sweep": {"projection_samples": 500}}"#,
        "smoke",
    );
    assert_eq!(code, 0);
    let rows = read_metrics_csv(&csv_path).unwrap();
    for n in [4, 5, 6] {
        assert!(rows.iter().any(|r| r.n == n && r.is_baseline()));
        assert!(rows.iter().filter(|r| r.n == n && !r.is_baseline()).all(|r| (0.0..=1.0).contains(&r.r1)));
    }

    let (code, _) = run(r#"{"dimensions": [10], "samples": 100, "basin": {"min_rate": 0.99}}"#, "floor");
    assert_eq!(code, 2);
    let (code, _) = run(r#"{"dimensions": [4], "unknown_field": 1}"#, "bad");
    assert_eq!(code, 1);
}
