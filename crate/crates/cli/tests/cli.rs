use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ainf-check"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn shipped_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/all-checks.json")
}

fn run(config: &Path, extra: &[&str]) -> Output {
    bin().arg("run").arg(config).args(extra).output().unwrap()
}

/// Report with wall times removed.
fn stable(out: &Output) -> String {
    let mut v: Value = serde_json::from_slice(&out.stdout).unwrap();
    for c in v["checks"].as_array_mut().unwrap() {
        c["wall_time_ms"] = Value::Null;
    }
    serde_json::to_string_pretty(&v).unwrap()
}

#[test]
fn ghost_only_passes() {
    let out = run(&fixture("ghost-only.json"), &[]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["checks"][0]["status"], "pass");
    assert_eq!(v["checks"][0]["anchor"], "w_k(S(X, Y)) = w_k(X) + w_k(Y)");
}

#[test]
fn corrupted_structure_polynomial_fails_with_identity() {
    let out = run(&fixture("corrupted-ghost.json"), &[]);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["checks"][0]["status"], "pass");
    assert_eq!(v["checks"][1]["status"], "fail");
    let failures = v["checks"][1]["failures"].as_array().unwrap();
    assert!(!failures.is_empty());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains(failures[0].as_str().unwrap()), "{stderr}");
}

#[test]
fn empty_check_list_passes() {
    let out = run(&fixture("empty.json"), &[]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["checks"].as_array().unwrap().is_empty());
    assert_eq!(v["summary"]["total"], 0);
}

#[test]
fn config_errors_exit_two() {
    assert_eq!(run(&fixture("bad-ring.json"), &[]).status.code(), Some(2));
    assert_eq!(run(&fixture("missing.json"), &[]).status.code(), Some(2));
    assert_eq!(run(&fixture("ghost-only.json"), &["--caps", "bogus=1"]).status.code(), Some(2));
}

#[test]
fn deterministic_across_runs_and_jobs() {
    let a = run(&shipped_config(), &["--jobs", "1"]);
    let b = run(&shipped_config(), &["--jobs", "4"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(stable(&a), stable(&b));
    let c = run(&shipped_config(), &["--seed", "7", "--caps", "max_samples=5"]);
    assert_eq!(c.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&c.stdout).unwrap();
    assert_eq!(v["seed"], 7);
}

#[test]
fn out_flag_writes_report() {
    let dir = std::env::temp_dir().join(format!("ainf-check-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("report.json");
    let out = run(&fixture("ghost-only.json"), &["--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["summary"]["pass"], 1);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn catalog_listing() {
    let out = bin().arg("list-checks").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let names: Vec<&str> = text.lines().map(|l| l.split('\t').next().unwrap()).collect();
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(names, sorted);
    assert!(text.lines().any(|l| l.starts_with("cech-exactness\t(††) is exact")));
    assert!(text.lines().any(|l| l.starts_with("delta-axioms\tδ(1) = 0")));
    let again = bin().arg("list-checks").output().unwrap();
    assert_eq!(text.as_bytes(), &again.stdout[..]);
    let ex = bin().args(["explain", "gluing"]).output().unwrap();
    assert!(ex.status.success());
    assert_eq!(bin().args(["explain", "nope"]).output().unwrap().status.code(), Some(2));
}
