//! Binary-level checks: exit codes, CSV shape, determinism across worker
//! counts, and per-point failure handling in scans.

use std::process::{Command, Output};

use renyi_qkd::cli::CSV_HEADER;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_renyi-qkd"))
}

fn run_args(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_lines(out: &Output) -> Vec<String> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(str::to_string)
        .collect()
}

#[test]
fn rejects_out_of_range_order() {
    let out = run_args(&["run", "--alpha", "0.9", "--n-total", "100000"]);
    assert_eq!(out.status.code(), Some(4));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("error"),
        "stderr should carry a JSON error: {err}"
    );
}

#[test]
fn rejects_unknown_scan_axis() {
    let out = run_args(&["scan", "--axis", "bogus", "--values", "1.2"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn clean_channel_yields_positive_rate() {
    let out = run_args(&[
        "run",
        "--depol",
        "0",
        "--loss",
        "0",
        "--alpha",
        "1.5",
        "--n-total",
        "1000000",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let lines = stdout_lines(&out);
    assert_eq!(lines[0], CSV_HEADER);
    let fields: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(fields.len(), CSV_HEADER.split(',').count());
    let rate: f64 = fields[10].parse().unwrap();
    assert!(rate > 0.0, "expected positive rate, row: {}", lines[1]);
}

#[test]
fn saturating_noise_exits_with_zero_rate_code() {
    let out = run_args(&[
        "run",
        "--depol",
        "0.25",
        "--alpha",
        "1.2",
        "--n-total",
        "100000",
        "--p-gen",
        "0.5",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let lines = stdout_lines(&out);
    let fields: Vec<&str> = lines[1].split(',').collect();
    let key_length: f64 = fields[9].parse().unwrap();
    let rate: f64 = fields[10].parse().unwrap();
    assert!(key_length <= 0.0);
    assert_eq!(rate, 0.0);
}

#[test]
fn scan_output_is_deterministic_across_worker_counts() {
    let args = [
        "scan",
        "--axis",
        "alpha",
        "--values",
        "1.1,1.6",
        "--depol",
        "0.01",
        "--n-total",
        "100000",
        "--p-gen",
        "0.5",
    ];
    let a = bin()
        .args(args)
        .env("RENYI_QKD_WORKERS", "1")
        .output()
        .unwrap();
    let b = bin()
        .args(args)
        .env("RENYI_QKD_WORKERS", "3")
        .output()
        .unwrap();
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(b.status.code(), Some(0));
    assert_eq!(
        a.stdout, b.stdout,
        "scan output must not depend on the pool size"
    );
    let lines = stdout_lines(&a);
    assert_eq!(lines.len(), 3, "header plus one row per value");
    assert_eq!(lines[0], CSV_HEADER);
}

#[test]
fn scan_keeps_going_past_a_bad_point() {
    // a one-round block cannot be split into key and test rounds
    let out = run_args(&[
        "scan",
        "--axis",
        "blocksize",
        "--values",
        "100000,1",
        "--depol",
        "0.01",
        "--p-gen",
        "0.5",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "scan completes despite the bad point"
    );
    let lines = stdout_lines(&out);
    assert_eq!(lines.len(), 3);
    assert!(
        !lines[1].contains("NaN"),
        "good point stays numeric: {}",
        lines[1]
    );
    assert!(
        lines[2].contains("NaN"),
        "bad point becomes a NaN row: {}",
        lines[2]
    );
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("scan_point"),
        "per-point diagnostic on stderr: {err}"
    );
}
