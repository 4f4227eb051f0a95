use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use evcoref_core::synthetic::{generate, SyntheticConfig};
use evcoref_core::write_mentions;

fn evcoref(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evcoref"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

fn corpus(dir: &Path) -> PathBuf {
    let path = dir.join("corpus.jsonl");
    let mut buf = Vec::new();
    write_mentions(&mut buf, &generate(&SyntheticConfig::default())).unwrap();
    std::fs::write(&path, buf).unwrap();
    path
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

#[test]
fn help_lists_defaults() {
    let out = evcoref(&["sweep", "--help"]);
    assert!(out.status.success());
    let help = text(&out.stdout);
    for needle in ["[default: 0.7]", "[default: 2]", "[default: 20]", "[default: 0.5]", "[default: 5]"] {
        assert!(help.contains(needle), "missing {needle} in:\n{help}");
    }
}

#[test]
fn validate_reports_line_and_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let good = corpus(dir.path());
    let out = evcoref(&["validate", good.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    assert!(text(&out.stdout).starts_with("ok: 60 mentions"));

    let first_line = std::fs::read_to_string(&good).unwrap().lines().next().unwrap().to_string();
    let bad = dir.path().join("bad.jsonl");
    let broken = first_line.replace("\"sentence_id\"", "\"sentence_idx\"");
    std::fs::write(&bad, format!("{first_line}\n{broken}\n")).unwrap();
    let out = evcoref(&["validate", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("line 2"), "{}", text(&out.stderr));

    let out = evcoref(&["validate", dir.path().join("missing.jsonl").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path());
    let args = ["simulate", "--corpus", c.to_str().unwrap(), "--scorer", "random", "--k", "3", "--seed", "1"];
    let a = evcoref(&args);
    let b = evcoref(&args);
    assert!(a.status.success(), "{}", text(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["config"]["seed"], 1);
    assert_eq!(v["records"].as_array().unwrap().len(), 60);
    let other = evcoref(&["simulate", "--corpus", c.to_str().unwrap(), "--scorer", "random", "--k", "3", "--seed", "2"]);
    assert_ne!(a.stdout, other.stdout);
}

#[test]
fn sweep_default_grid_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path());
    let out_path = dir.path().join("curves.csv");
    let manifest = dir.path().join("manifest.json");
    let out = evcoref(&[
        "sweep",
        "--corpus",
        c.to_str().unwrap(),
        "--replicates",
        "2",
        "--seed",
        "3",
        "--out",
        out_path.to_str().unwrap(),
        "--manifest",
        manifest.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let csv = std::fs::read_to_string(&out_path).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "k,recall,comparisons,replicates");
    assert_eq!(lines.len(), 38);
    assert!(lines[1].starts_with("2,"));
    assert!(lines[37].starts_with("20,"));
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&manifest).unwrap()).unwrap();
    assert_eq!(m["seed"], 3);
    assert_eq!(m["replicates"], 2);
    assert_eq!(m["k_grid"].as_array().unwrap().len(), 37);
    assert_eq!(m["scorer"]["lambda"], 0.7);
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path());
    let c = c.to_str().unwrap();
    for args in [
        vec!["simulate", "--corpus", c, "--k", "3", "--scorer", "matrix"],
        vec!["simulate", "--corpus", c, "--k", "3", "--matrix", "m.csv"],
        vec!["simulate", "--corpus", c, "--k", "0.5"],
        vec!["simulate", "--corpus", c, "--k", "3", "--lambda", "1.2"],
        vec!["tune-lambda", "--corpus", c, "--scorer", "random"],
        vec!["tune-lambda", "--corpus", c, "--lambda-grid", "0:2:0.5"],
        vec!["sweep", "--corpus", c, "--k-min", "5", "--k-max", "2"],
        vec!["sweep", "--corpus", c, "--replicates", "0"],
        vec!["simulate", "--corpus", c],
        vec!["frobnicate"],
    ] {
        let out = evcoref(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", text(&out.stderr));
    }
}

#[test]
fn stats_and_tuning() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path());
    let out = evcoref(&["stats", c.to_str().unwrap(), "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["mentions"], 60);
    assert_eq!(v["topics"], 3);

    let report = dir.path().join("report.json");
    let out = evcoref(&[
        "tune-lambda",
        "--corpus",
        c.to_str().unwrap(),
        "--lambda-grid",
        "0.2,0.7",
        "--replicates",
        "1",
        "--k-max",
        "4",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["curves"].as_array().unwrap().len(), 2);
    assert_eq!(r["curves"][0]["points"].as_array().unwrap().len(), 5);
}

#[test]
fn matrix_scorer_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path());
    let matrix = dir.path().join("m.csv");
    std::fs::write(&matrix, "mention_id_a,mention_id_b,score\n").unwrap();
    let base = ["simulate", "--corpus", c.to_str().unwrap(), "--k", "2", "--scorer", "matrix", "--matrix", matrix.to_str().unwrap()];
    // Empty matrix without a default: the first scored pair is missing.
    let out = evcoref(&base);
    assert_eq!(out.status.code(), Some(1), "{}", text(&out.stderr));
    assert!(text(&out.stderr).contains("no score"), "{}", text(&out.stderr));
    let mut with_default = base.to_vec();
    with_default.extend(["--default-score", "0.5", "--no-records"]);
    let out = evcoref(&with_default);
    assert!(out.status.success(), "{}", text(&out.stderr));
}
