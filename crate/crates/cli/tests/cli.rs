use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pilot_core::build::{build_tree_observed, NodeVisit};
use pilot_core::{ingest_csv, Hyperparams};

fn pilot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pilot")).args(args).output().expect("run pilot")
}

fn write_csv(dir: &Path) -> PathBuf {
    let path = dir.join("train.csv");
    let mut text = String::from("x1,color,x2,y\n");
    for i in 0..300 {
        let x1 = (i as f64 * 0.37).sin() * 2.0;
        let x2 = (i % 17) as f64 / 17.0;
        let color = ["red", "green", "blue"][i % 3];
        let bump = if color == "green" { 1.5 } else { 0.0 };
        let y = x1 * x1 + 3.0 * x2 + bump + ((i * 7919) % 13) as f64 * 0.01;
        text.push_str(&format!("{x1},{color},{x2},{y}\n"));
    }
    fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn train_then_predict_reproduces_fitted_values() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_csv(dir.path());
    let model = dir.path().join("m.json");
    let preds = dir.path().join("p.csv");

    let out = pilot(&["train", "--data", s(&data), "--target", "y", "--out", s(&model)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = String::from_utf8(out.stdout).unwrap();
    assert!(summary.starts_with("nodes="), "{summary}");
    assert!(summary.contains(" leaves=") && summary.contains(" depth=") && summary.contains(" train_rss="));

    let out = pilot(&["predict", "--model", s(&model), "--data", s(&data), "--out", s(&preds)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&preds).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("prediction"));
    let got: Vec<f64> = lines.map(|l| l.parse().unwrap()).collect();

    let ds = ingest_csv(&data, "y", &HashSet::new()).unwrap();
    let outcome = build_tree_observed(&ds, &Hyperparams::default(), &mut |_: &NodeVisit<'_>| {}).unwrap();
    assert_eq!(got.len(), outcome.fitted.len());
    for (a, b) in got.iter().zip(&outcome.fitted) {
        assert_eq!(a.to_bits(), b.to_bits());
    }

    let out = pilot(&["predict", "--model", s(&model), "--data", s(&data)]);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), text);
}

#[test]
fn zero_depth_is_a_usage_error() {
    let out = pilot(&["train", "--data", "d.csv", "--target", "y", "--out", "m.json", "--max-depth", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--max-depth"));
}

#[test]
fn unknown_and_conflicting_flags_are_usage_errors() {
    assert_eq!(pilot(&["train", "--bogus"]).status.code(), Some(2));
    let out = pilot(&["train", "--data", "d.csv", "--target", "y", "--out", "m.json", "--mode", "cart", "--allowed-kinds", "LIN"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(pilot(&[]).status.code(), Some(2));
}

#[test]
fn unreadable_input_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    let out = pilot(&["train", "--data", s(&missing), "--target", "y", "--out", s(&dir.path().join("m.json"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.csv"));

    let data = write_csv(dir.path());
    let out = pilot(&["train", "--data", s(&data), "--target", "nothere", "--out", s(&dir.path().join("m.json"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nothere"));
}

#[test]
fn eval_reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let args = |out: &Path| -> Vec<String> {
        ["eval", "--generate", "additive", "--n", "400", "--folds", "5", "--seed", "7", "--out", s(out)]
            .iter()
            .map(|x| x.to_string())
            .collect()
    };
    let run = |out: &Path| {
        let v = args(out);
        pilot(&v.iter().map(String::as_str).collect::<Vec<_>>())
    };
    let oa = run(&a);
    let ob = run(&b);
    assert!(oa.status.success());
    assert_eq!(oa.stdout, ob.stdout);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let csv = fs::read_to_string(&a).unwrap();
    assert!(csv.starts_with("dataset,method,folds,seed,mse,ratio,status\n"));
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn eval_on_csv_with_yeo_johnson() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_csv(dir.path());
    let out = pilot(&["eval", "--data", s(&data), "--target", "y", "--folds", "3", "--yeo-johnson", "--threads", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    for m in ["pilot", "cart", "pilot-yj", "cart-yj"] {
        assert!(text.lines().any(|l| l.split_whitespace().nth(1) == Some(m)), "{text}");
    }
}

#[test]
fn print_importance_and_version() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_csv(dir.path());
    let model = dir.path().join("m.json");
    assert!(pilot(&["train", "--data", s(&data), "--target", "y", "--out", s(&model), "--mode", "cart"]).status.success());

    let printed = String::from_utf8(pilot(&["print", "--model", s(&model)]).stdout).unwrap();
    assert!(printed.starts_with("PCON "), "{printed}");
    assert!(printed.lines().all(|l| !l.trim_start().starts_with("LIN")));

    let imp = String::from_utf8(pilot(&["importance", "--model", s(&model)]).stdout).unwrap();
    let rows: Vec<(String, f64)> = imp
        .lines()
        .map(|l| {
            let (name, v) = l.split_once(',').unwrap();
            (name.to_string(), v.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.iter().map(|r| r.0.as_str()).collect::<Vec<_>>(), ["x1", "color", "x2"]);
    assert!((rows.iter().map(|r| r.1).sum::<f64>() - 1.0).abs() < 1e-12);

    let version = String::from_utf8(pilot(&["--version"]).stdout).unwrap();
    assert!(version.contains("schema_version 1"), "{version}");
}

#[test]
fn predict_rejects_mismatched_columns() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_csv(dir.path());
    let model = dir.path().join("m.json");
    assert!(pilot(&["train", "--data", s(&data), "--target", "y", "--out", s(&model)]).status.success());
    let other = dir.path().join("other.csv");
    fs::write(&other, "x1,shade\n0.5,red\n").unwrap();
    let out = pilot(&["predict", "--model", s(&model), "--data", s(&other)]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("color") && err.contains("x2") && err.contains("shade"), "{err}");
}
