//! End-to-end checks of the `sappo` binary: exit codes, validation
//! messages, and the example/validate round trip.

use std::path::Path;
use std::process::{Command, Output};

fn sappo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sappo"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, contents: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, contents).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn example_output_validates() {
    let dir = tempfile::tempdir().unwrap();
    let ex = sappo(&["example"]);
    assert!(ex.status.success());
    let toml = String::from_utf8(ex.stdout).unwrap();
    let path = write(dir.path(), "example.toml", &toml);

    let v = sappo(&["validate", &path]);
    assert!(v.status.success(), "stderr: {}", String::from_utf8_lossy(&v.stderr));
    let line = String::from_utf8(v.stdout).unwrap();
    assert!(line.starts_with("ok:"), "got: {line}");
}

#[test]
fn malformed_toml_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "bad.toml", "this is not [ toml");
    let out = sappo(&["validate", &path]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn invalid_field_exits_2_and_names_field() {
    let dir = tempfile::tempdir().unwrap();
    let ex = sappo(&["example"]);
    let toml = String::from_utf8(ex.stdout).unwrap();
    // Temperature far below the model's validity range.
    let broken = toml.replace("temperature_c = 20", "temperature_c = -300");
    assert_ne!(broken, toml, "expected the field in the example output");
    let path = write(dir.path(), "cold.toml", &broken);

    let out = sappo(&["validate", &path]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("temperature_c"), "stderr: {err}");
}

#[test]
fn missing_file_exits_2() {
    let out = sappo(&["validate", "/nonexistent/scenario.toml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let ex = sappo(&["example"]);
    let toml = String::from_utf8(ex.stdout).unwrap();
    let path = write(dir.path(), "sc.toml", &toml);
    let out_dir = dir.path().join("run");

    let out = sappo(&[
        "simulate",
        &path,
        "--out",
        out_dir.to_str().unwrap(),
        "--cycles",
        "20",
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    for name in ["measures.csv", "fixes.csv", "summary.csv", "path.svg"] {
        assert!(out_dir.join(name).is_file(), "missing {name}");
    }
}

#[test]
fn coverage_writes_maps() {
    let dir = tempfile::tempdir().unwrap();
    let ex = sappo(&["example"]);
    let toml = String::from_utf8(ex.stdout).unwrap();
    let path = write(dir.path(), "sc.toml", &toml);
    let out_dir = dir.path().join("cov");

    let out = sappo(&[
        "coverage",
        &path,
        "--out",
        out_dir.to_str().unwrap(),
        "--cell-size",
        "0.2",
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    for min in 1..=3 {
        assert!(out_dir.join(format!("coverage_min{min}.pgm")).is_file());
        assert!(out_dir.join(format!("coverage_min{min}.csv")).is_file());
    }
}

#[test]
fn curves_outputs_expected_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("curves");
    let out = sappo(&["curves", "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success());
    let by_angle = std::fs::read_to_string(out_dir.join("error_vs_orientation.csv")).unwrap();
    assert!(by_angle.starts_with("orientation_deg,error_mm\n"));
    let by_dist = std::fs::read_to_string(out_dir.join("error_vs_distance.csv")).unwrap();
    assert!(by_dist.starts_with("distance_m,error_mm\n"));
}
