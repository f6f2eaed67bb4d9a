use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qsdlab_core::format::{load_model, model_digest, save_model};
use qsdlab_core::model::{make_family, ModelFamily, ModelFamilySpec};
use serde_json::Value;

fn qsdlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qsdlab")).args(args).output().expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn error_code(out: &Output) -> String {
    assert!(!out.status.success());
    let v: Value = serde_json::from_slice(&out.stderr).unwrap();
    v["error"]["code"].as_str().unwrap().to_string()
}

fn write_g2(dir: &Path) -> PathBuf {
    let path = dir.join("g2.txt");
    std::fs::write(&path, "# two states, killing at state 1\n1 2 1\n1 0 1\n2 1 1\n").unwrap();
    path
}

fn schema() -> jsonschema::Validator {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/schema/qsdlab-result-v1.json")).unwrap();
    jsonschema::validator_for(&serde_json::from_str(&text).unwrap()).unwrap()
}

#[test]
fn every_document_validates_against_the_schema() {
    let dir = tempfile::tempdir().unwrap();
    let g2 = write_g2(dir.path());
    let g2 = g2.to_str().unwrap();
    let u = dir.path().join("u.json");
    std::fs::write(&u, "[0.3819660112501051, 0.6180339887498949]").unwrap();
    let u = u.to_str().unwrap();
    let runs: Vec<Vec<&str>> = vec![
        vec!["compute", "--model", g2],
        vec!["compute", "--family", "feedback-chain", "--p", "0.3", "--r", "0.2", "--w", "0.5", "--trunc", "200"],
        vec!["compute", "--family", "bd-halfline", "--p", "0.25", "--c", "1", "--trunc", "100"],
        vec!["compute", "--family", "bd-line", "--p", "0.4", "--c", "2", "--trunc", "60"],
        vec!["classify", "--family", "bd-line", "--p", "0.4", "--c", "2", "--trunc", "60", "--k", "-3"],
        vec!["bound", "--model", g2],
        vec!["bound", "--family", "bd-halfline", "--p", "0.25", "--c", "1", "--trunc", "50"],
        vec!["simulate", "--model", g2, "--paths", "5000", "--horizon", "4", "--u", u, "--timing"],
        vec!["verify", "--model", g2, "--u", u, "--lambda", "0.3819660112501051"],
    ];
    let validator = schema();
    for args in runs {
        let doc = json_of(&qsdlab(&args));
        let errors: Vec<String> = validator.iter_errors(&doc).map(|e| format!("{} at {}", e, e.instance_path)).collect();
        assert!(errors.is_empty(), "{args:?}: {errors:#?}");
    }
}

#[test]
fn save_then_load_keeps_the_digest() {
    let dir = tempfile::tempdir().unwrap();
    for f in [
        ModelFamily::FeedbackChain { p: 0.3, r: 0.2, w: 0.5 },
        ModelFamily::BdLine { p: 0.4, c: 2.0 },
        ModelFamily::BdHalfline { p: 0.25, c: 1.0 },
    ] {
        let m = make_family(&ModelFamilySpec::new(f, 40)).unwrap();
        let path = dir.path().join("m.txt");
        save_model(&m, &path).unwrap();
        assert_eq!(model_digest(&load_model(&path).unwrap()), model_digest(&m));
    }
}

#[test]
fn file_errors_have_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "1 2 1\n1 2 abc\n").unwrap();
    let out = qsdlab(&["compute", "--model", bad.to_str().unwrap()]);
    assert_eq!(error_code(&out), "parse_error");
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let manifest = dir.path().join("m.json");
    std::fs::write(&manifest, r#"{"format": "qmatrix-v0", "entries": [[1, 0, 1.0]]}"#).unwrap();
    assert_eq!(error_code(&qsdlab(&["compute", "--model", manifest.to_str().unwrap()])), "unsupported_format");

    let missing = dir.path().join("none.txt");
    assert_eq!(error_code(&qsdlab(&["compute", "--model", missing.to_str().unwrap()])), "io_error");
}

#[test]
fn manifest_with_relative_entries_matches_triplets() {
    let dir = tempfile::tempdir().unwrap();
    let g2 = write_g2(dir.path());
    let manifest = dir.path().join("g2.json");
    std::fs::write(&manifest, r#"{"format": "qmatrix-triplets-v1", "states": 2, "entries": "g2.txt"}"#).unwrap();
    let a = json_of(&qsdlab(&["classify", "--model", g2.to_str().unwrap()]));
    let b = json_of(&qsdlab(&["classify", "--model", manifest.to_str().unwrap()]));
    assert_eq!(a["input_digest"], b["input_digest"]);
    assert_eq!(a["outputs"], b["outputs"]);
}

#[test]
fn usage_and_parameter_errors() {
    let out = qsdlab(&["compute", "--family", "bd-line", "--p", "0.4", "--trunc", "30"]);
    assert_eq!(error_code(&out), "bad_parameters");
    let out = qsdlab(&["compute", "--family", "bd-line", "--p", "1.4", "--c", "1", "--trunc", "30"]);
    assert_eq!(error_code(&out), "bad_parameters");
    let out = qsdlab(&["compute", "--family", "bd-line", "--p", "0.4", "--c", "1"]);
    assert_eq!(error_code(&out), "bad_parameters");
    let out = qsdlab(&["compute", "--family", "bd-line", "--p", "0.4", "--c", "1", "--trunc", "30", "--tol", "0"]);
    assert_eq!(error_code(&out), "bad_parameters");
    let out = qsdlab(&["compute"]);
    assert_eq!(error_code(&out), "usage");
    assert_eq!(out.status.code(), Some(2));
    let out = qsdlab(&["compute", "--model", "x", "--family", "bd-line"]);
    assert_eq!(error_code(&out), "usage");
}

#[test]
fn failed_residual_gate_is_an_error_after_output() {
    let dir = tempfile::tempdir().unwrap();
    let g2 = write_g2(dir.path());
    let u = dir.path().join("u.txt");
    std::fs::write(&u, "# not a QSD\n0.5 0.5\n").unwrap();
    let out = qsdlab(&["verify", "--model", g2.to_str().unwrap(), "--u", u.to_str().unwrap(), "--lambda", "0.38"]);
    assert_eq!(error_code(&out), "residual_gate_failed");
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["outputs"]["residual_gate_passed"], false);
}

#[test]
fn verify_accepts_a_result_document() {
    let dir = tempfile::tempdir().unwrap();
    let g2 = write_g2(dir.path());
    let g2 = g2.to_str().unwrap();
    let doc = dir.path().join("doc.json");
    assert!(qsdlab(&["compute", "--model", g2, "--out", doc.to_str().unwrap()]).status.success());
    let lambda = serde_json::from_str::<Value>(&std::fs::read_to_string(&doc).unwrap()).unwrap()["outputs"]["lambda"].to_string();
    let v = json_of(&qsdlab(&["verify", "--model", g2, "--u", doc.to_str().unwrap(), "--lambda", &lambda]));
    assert_eq!(v["outputs"]["residual_gate_passed"], true);
}

#[test]
fn csv_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let g2 = write_g2(dir.path());
    let out = qsdlab(&["compute", "--model", g2.to_str().unwrap(), "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "label,u");
    assert_eq!(lines.len(), 3);
    let u1: f64 = lines[1].split(',').nth(1).unwrap().parse().unwrap();
    assert!((u1 - (3.0 - 5f64.sqrt()) / 2.0).abs() < 1e-9);

    let out = qsdlab(&["classify", "--family", "bd-line", "--p", "0.4", "--c", "2", "--trunc", "40", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("level,f_kk,sum_x,sum_xy\n"));
    assert_eq!(text.lines().count(), 4);

    let trace = dir.path().join("trace.csv");
    let out = qsdlab(&[
        "simulate", "--model", g2.to_str().unwrap(), "--paths", "2000", "--horizon", "3", "--format", "csv",
        "--trace", trace.to_str().unwrap(), "--trace-paths", "5",
    ]);
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("time,survivors,fraction\n"));
    let trace = std::fs::read_to_string(trace).unwrap();
    assert!(trace.starts_with("path_id,time,state\n0,0,1\n"));
    assert!(trace.lines().skip(1).all(|l| l.split(',').next().unwrap().parse::<usize>().unwrap() < 5));
}

#[test]
fn negative_labels_select_anchors_on_the_line() {
    let doc = json_of(&qsdlab(&["classify", "--family", "bd-line", "--p", "0.4", "--c", "2", "--trunc", "120", "--k", "-3"]));
    assert_eq!(doc["outputs"]["classification"]["anchor_label"], -3);
    assert_eq!(doc["outputs"]["classification"]["recurrence"], "lambda-null-recurrent");
    let out = qsdlab(&["classify", "--family", "bd-line", "--p", "0.4", "--c", "2", "--trunc", "120", "--k", "99"]);
    assert_eq!(error_code(&out), "bad_index");
}
