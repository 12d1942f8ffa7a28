use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cohortscope")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn synth(dir: &Path, n: &str, seed: &str) {
    let o = cli(&["synth", "--patients", n, "--seed", seed, "--out", dir.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

fn digest(dir: &Path) -> Vec<(String, String)> {
    let mut files: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    files
        .iter()
        .map(|p| {
            let hash = Sha256::digest(std::fs::read(p).unwrap());
            (p.file_name().unwrap().to_string_lossy().into_owned(), format!("{hash:x}"))
        })
        .collect()
}

#[test]
fn synth_is_deterministic_per_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    synth(&a, "100", "5");
    synth(&b, "100", "5");
    synth(&c, "100", "6");
    assert_eq!(digest(&a), digest(&b));
    assert_ne!(digest(&a), digest(&c));
}

#[test]
fn query_prints_count_then_uids() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d");
    synth(&data, "100", "1");
    let d = data.to_str().unwrap();
    let o = cli(&["query", "--data", d, "--dsl", "true"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("100"));
    assert_eq!(lines.count(), 100);

    let o = cli(&["query", "--data", d, "--dsl", "age >= 65", "--parent-dsl", "male == 1"]);
    assert!(o.status.success());
    let sub: usize = stdout(&o).lines().next().unwrap().parse().unwrap();
    assert!(sub <= 100);

    let o = cli(&["query", "--data", d, "--dsl", "age >"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("ParseError"));
}

#[test]
fn nl_mock_prints_trace_then_query() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d");
    let log = tmp.path().join("prompts.jsonl");
    synth(&data, "50", "1");
    let d = data.to_str().unwrap();
    let o = cli(&[
        "nl",
        "--data",
        d,
        "--text",
        "Elderly male patients who suffered a stroke due to the LAA.",
        "--log",
        log.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert_eq!(out.lines().last(), Some("male == 1 and age >= 65 and toast == 1"));
    assert!(out.contains("\"inferenceText\""));

    let o = cli(&["audit", "--log", log.to_str().unwrap(), "--data", d]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("no violations"));

    let o = cli(&[
        "nl",
        "--data",
        d,
        "--text",
        "patients who showed SBP >= 180 mmHg and received an antiplatelet agent within 48 hours",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("\"MissingField\""));
}

#[test]
fn usage_and_missing_data_are_user_errors() {
    assert_eq!(cli(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(cli(&["query", "--data", "/nonexistent/dir", "--dsl", "true"]).status.code(), Some(1));
    assert_eq!(cli(&["--help"]).status.code(), Some(0));
}
