use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn monopole(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_monopole"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, cfg: Value) -> String {
    let path = dir.join(name);
    std::fs::write(&path, cfg.to_string()).unwrap();
    path.display().to_string()
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON report")
}

fn small_taubnut_box() -> Value {
    json!({ "model": "taubnut", "box": { "n_max": 1, "l_max": 2, "nus": [[0, 0], [1, 0.5]], "eps": [1.0] } })
}

#[test]
fn flat_spectrum_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        json!({ "model": "flat", "box": { "n_max": 2, "l_max": 2 } }),
    );
    let out = monopole(&["spectrum", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0));
    let rep = report(&out);
    let rows = rep["results"].as_array().unwrap();
    assert_eq!(rows.len(), 6);
    let hit = rows
        .iter()
        .find(|r| r["values"]["n"] == json!(0) && r["values"]["l"] == json!(1.0))
        .unwrap();
    assert_eq!(hit["values"]["energy"], json!(2.5));
    assert_eq!(rep["summary"]["pass"], json!(true));
}

#[test]
fn empty_box_is_an_empty_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        json!({ "box": { "n_max": 2, "l_max": 0.5 } }),
    );
    let out = monopole(&["spectrum", "--config", &cfg, "--model", "flat"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(&out)["results"], json!([]));
}

#[test]
fn taubnut_flat_limit_spectrum_is_linear() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        json!({
            "model": "taubnut",
            "taubnut": { "a": 0.0, "b": 1.0, "c1": 0.0, "d": 0.0, "c0": 2.0, "c4": 0.0 },
            "box": { "n_max": 3, "nus": [[0, 0]] }
        }),
    );
    let out = monopole(&["spectrum", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0));
    for row in report(&out)["results"].as_array().unwrap() {
        let p = row["values"]["p"].as_f64().unwrap();
        let e = row["values"]["energy"].as_f64().unwrap();
        // 2E = N = 4p + 3
        assert!((e - (4.0 * p + 3.0) / 2.0).abs() < 1e-12, "{row}");
    }
}

#[test]
fn flat_unirreps_flag_closed_forms() {
    let out = monopole(&["verify", "unirreps", "--model", "flat", "--p", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let rep = report(&out);
    let rows = rep["results"].as_array().unwrap();
    assert!(rows
        .iter()
        .any(|r| r["check"] == json!("branch") && r["values"]["paper_match"] == json!(true)));
    assert!(rows
        .iter()
        .all(|r| r["values"]["p"].is_null() || r["values"]["p"] == json!(3)));
}

#[test]
fn flat_oracle_passes() {
    let out = monopole(&["verify", "oracle", "--model", "flat", "--jobs", "2"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn recurrence_exit_codes_follow_convention() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", small_taubnut_box());
    let printed = monopole(&["verify", "recurrence", "--config", &cfg]);
    assert_eq!(printed.status.code(), Some(1));
    let rep = report(&printed);
    assert_eq!(rep["summary"]["pass"], json!(false));
    assert!(rep["summary"]["failures"][0]
        .as_str()
        .unwrap()
        .contains("recurrence/"));
    let fixed = monopole(&[
        "verify",
        "recurrence",
        "--config",
        &cfg,
        "--convention",
        "corrected",
    ]);
    assert_eq!(fixed.status.code(), Some(0));
}

#[test]
fn recurrence_needs_taubnut() {
    let out = monopole(&["verify", "recurrence", "--model", "flat"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_errors_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\n  \"model\": \"flat\",\n  \"colour\": 3\n}").unwrap();
    let out = monopole(&["spectrum", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
    let out = monopole(&["spectrum", "--tol-algebra", "-1"]);
    assert_eq!(out.status.code(), Some(2));
    let cfg = write_config(dir.path(), "neg.json", json!({ "box": { "n_max": -1 } }));
    assert_eq!(
        monopole(&["spectrum", "--config", &cfg]).status.code(),
        Some(2)
    );
    assert_eq!(
        monopole(&["spectrum", "--model", "curved"]).status.code(),
        Some(2)
    );
}

#[test]
fn nonconvergence_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        json!({ "oracle": { "cells": 8, "tol": 1e-13 } }),
    );
    let out = monopole(&["verify", "oracle", "--model", "flat", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn reports_are_stable_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", small_taubnut_box());
    let strip = |out: Output| {
        let mut v = report(&out);
        v.as_object_mut().unwrap().remove("timing");
        serde_json::to_string(&v).unwrap()
    };
    let a = strip(monopole(&[
        "verify", "algebra", "--config", &cfg, "--jobs", "1",
    ]));
    let b = strip(monopole(&[
        "verify", "algebra", "--config", &cfg, "--jobs", "4",
    ]));
    assert_eq!(a, b);
}

#[test]
fn csv_uses_seventeen_digits() {
    let out = monopole(&["spectrum", "--model", "flat", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "energy").unwrap();
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[col], "2.5000000000000000e0");
}

#[test]
fn merge_reports() {
    let dir = tempfile::tempdir().unwrap();
    let pass_a = dir.path().join("a.json");
    let pass_b = dir.path().join("b.json");
    let fail = dir.path().join("f.json");
    let cfg = write_config(dir.path(), "c.json", small_taubnut_box());
    let run = |args: &[&str], code: i32| assert_eq!(monopole(args).status.code(), Some(code));
    run(
        &[
            "spectrum",
            "--model",
            "flat",
            "--out",
            pass_a.to_str().unwrap(),
        ],
        0,
    );
    run(
        &[
            "verify",
            "oracle",
            "--model",
            "flat",
            "--out",
            pass_b.to_str().unwrap(),
        ],
        0,
    );
    run(
        &[
            "verify",
            "recurrence",
            "--config",
            &cfg,
            "--out",
            fail.to_str().unwrap(),
        ],
        1,
    );

    let ok = monopole(&[
        "report",
        "merge",
        pass_a.to_str().unwrap(),
        pass_b.to_str().unwrap(),
    ]);
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(report(&ok)["summary"]["pass"], json!(true));

    let mixed = monopole(&[
        "report",
        "merge",
        pass_a.to_str().unwrap(),
        fail.to_str().unwrap(),
    ]);
    assert_eq!(mixed.status.code(), Some(1));
    let rep = report(&mixed);
    assert!(rep["summary"]["failures"][0]
        .as_str()
        .unwrap()
        .starts_with("verify recurrence/"));

    assert_eq!(monopole(&["report", "merge"]).status.code(), Some(2));
    let junk = dir.path().join("junk.json");
    std::fs::write(&junk, "{\"command\": 1}").unwrap();
    assert_eq!(
        monopole(&["report", "merge", junk.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}
