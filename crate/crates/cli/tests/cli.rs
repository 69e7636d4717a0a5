use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn heatbv(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_heatbv"));
    cmd.args(args);
    if let Some(n) = threads {
        cmd.env("HEATBV_THREADS", n);
    }
    cmd.output().expect("spawn heatbv")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

const ARC: &str = r#"
scenario = "bv"
output = "out"
tolerance = 0.01

[geometry]
kind = "circle"
length = 1.0
cells = 4096

[sweep]
t0 = 1e-2
count = 6

[set]
intervals = [[0.0, 0.5]]
"#;

#[test]
fn bv_arc_passes_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "arc.toml", ARC);
    let out = heatbv(&["run", &cfg], None);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let res = dir.path().join("out");
    for f in ["samples.csv", "verdict.json", "curve.svg"] {
        assert!(res.join(f).is_file(), "{f} missing");
    }
    let csv = fs::read_to_string(res.join("samples.csv")).unwrap();
    assert!(csv.starts_with("functional,geometry,N,p,t,path,value,seconds,pairs\n"));
    assert_eq!(csv.lines().count(), 7);
    let verdict: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(res.join("verdict.json")).unwrap()).unwrap();
    assert_eq!(verdict[0]["scenario"], "arc");
    assert_eq!(verdict[0]["pass"], true);
}

#[test]
fn csv_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let body = ARC.replace("\"out\"", "\"a\"");
    let a = write_config(dir.path(), "a.toml", &body);
    let b = write_config(dir.path(), "b.toml", &body.replace("\"a\"", "\"b\""));
    assert_eq!(heatbv(&["run", &a], Some("2")).status.code(), Some(0));
    assert_eq!(heatbv(&["run", &b], Some("2")).status.code(), Some(0));
    let read = |d: &str| fs::read(dir.path().join(d).join("samples.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
}

#[test]
fn validate_kernel_command() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "k.toml",
        r#"
scenario = "sobolev"
output = "kernel"
[geometry]
kind = "torus"
length = 1.0
cells = 32
dim = 2
[engine]
backend = "spectral"
[sweep]
t0 = 1e-1
ratio = 0.5
count = 4
[field]
kind = "sine"
"#,
    );
    let out = heatbv(&["validate-kernel", &cfg], None);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("k/axioms"));
    assert!(dir.path().join("kernel/kernel_report.json").is_file());
}

#[test]
fn malformed_config_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", "scenario = \"bv\"\noutput = [1,\n");
    let out = heatbv(&["run", &cfg], None);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn guard_violation_names_minimum_resolution() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "g.toml",
        &ARC.replace("cells = 4096", "cells = 256")
            .replace("t0 = 1e-2", "t0 = 1e-4"),
    );
    let out = heatbv(&["run", &cfg], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cells"));
}

#[test]
fn failing_verdict_exits_two_and_report_agrees() {
    let dir = tempfile::tempdir().unwrap();
    // a jump field is not Sobolev: the energy keeps growing as r halves
    let cfg = write_config(
        dir.path(),
        "m.toml",
        r#"
scenario = "membership"
output = "results/m"
expect = "bounded"
tolerance = 0.05
[geometry]
kind = "circle"
length = 1.0
cells = 1024
[sweep]
t0 = 0.08
count = 4
[field]
kind = "steps"
intervals = [[0.0, 0.5, 1.0]]
"#,
    );
    assert_eq!(heatbv(&["run", &cfg], None).status.code(), Some(2));
    let ok = write_config(
        dir.path(),
        "ok.toml",
        &ARC.replace("\"out\"", "\"results/ok\""),
    );
    assert_eq!(heatbv(&["run", &ok], None).status.code(), Some(0));

    let res = dir.path().join("results");
    let out = heatbv(&["report", res.to_str().unwrap()], None);
    assert_ne!(out.status.code(), Some(0));
    let table = String::from_utf8_lossy(&out.stdout).into_owned();
    let rows: Vec<&str> = table.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with('m') && rows[0].ends_with("FAIL"));
    assert!(rows[1].starts_with("ok") && rows[1].ends_with("pass"));
}

#[test]
fn empty_report_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = heatbv(&["report", dir.path().to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 1);
}
