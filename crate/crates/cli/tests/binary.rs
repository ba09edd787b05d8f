use std::process::Command;

use polymoments_cli::{Document, SimulateResult, SAMPLES_ENV};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_polymoments"));
    cmd.env_remove(SAMPLES_ENV);
    cmd
}

#[test]
fn sample_count_from_environment() {
    let out = bin()
        .args(["simulate", "--n", "2", "--q", "1", "--stat", "V", "--p", "2", "--seed", "5"])
        .env(SAMPLES_ENV, "3000")
        .output()
        .unwrap();
    assert!(out.status.success());
    let doc: Document<SimulateResult> = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc.results[0].samples, 3000);

    let out = bin()
        .args(["simulate", "--n", "2", "--q", "1", "--stat", "V", "--p", "2", "--seed", "5", "--samples", "4000"])
        .env(SAMPLES_ENV, "3000")
        .output()
        .unwrap();
    let doc: Document<SimulateResult> = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc.results[0].samples, 4000);

    let out = bin()
        .args(["simulate", "--n", "2", "--q", "1", "--stat", "V", "--p", "2", "--seed", "5"])
        .env(SAMPLES_ENV, "lots")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1);
}

#[test]
fn out_flag_writes_file() {
    let dir = std::env::temp_dir().join(format!("polymoments-out-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("table.csv");
    let status = bin()
        .args(["table", "--q-list", "2", "--n-list", "1,2", "--moments", "2", "--out"])
        .arg(&path)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("n,q,moment_order,log_value,value\n1,2,2,"));
    assert!(text.ends_with('\n'));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn exact_suite_reports_trend_failures() {
    let out = bin().args(["validate", "--suite", "exact", "--format", "csv"]).output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    let failing: Vec<&str> = text
        .lines()
        .skip(1)
        .filter(|l| l.split(',').nth(3) == Some("false"))
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(out.status.code(), Some(if failing.is_empty() { 0 } else { 1 }));
    assert!(failing.iter().all(|id| id.starts_with("c8-")), "{failing:?}");
}

#[test]
fn simulate_repeats_byte_identically() {
    let args = ["simulate", "--n", "4", "--q", "3", "--stat", "U", "--p", "1.5", "--samples", "50000", "--seed", "123"];
    let a = bin().args(args).output().unwrap();
    let b = bin().args(args).args(["--threads", "2"]).output().unwrap();
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}
