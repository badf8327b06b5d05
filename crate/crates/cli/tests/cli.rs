use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use gesture_uda::adversarial::{Model, ModelConfig};
use gesture_uda::metrics::MetricsReport;
use gesture_uda::params::{Checkpoint, Params};

fn run(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gesture-uda"))
        .env("GESTURE_UDA_OUT", root)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(root: &Path, args: &[&str]) -> String {
    let out = run(root, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

const TINY: &[&str] = &[
    "--trials", "6", "--hidden", "6", "--max-scale", "3", "--subsets", "2", "--batch", "8", "--seeds", "0", "--folds", "3", "--fold", "0",
];

fn with<'a>(head: &[&'a str], tail: &[&'a str]) -> Vec<&'a str> {
    head.iter().chain(TINY).chain(tail).copied().collect()
}

#[test]
fn generate_null_shift_is_identical_and_deterministic() {
    let root = tempfile::tempdir().unwrap();
    let r = root.path();
    ok(r, &["generate", "--preset", "none", "--trials", "5", "--name", "a"]);
    ok(r, &["generate", "--preset", "none", "--trials", "5", "--name", "b"]);
    let read = |p: &str| fs::read(r.join(p)).unwrap();
    assert_eq!(read("a/simulator/kinematics.csv"), read("a/real/kinematics.csv"));
    for f in ["simulator/kinematics.csv", "simulator/features.csv", "real/labels.csv", "manifest.json"] {
        assert_eq!(read(&format!("a/{f}")), read(&format!("b/{f}")), "{f}");
    }
}

#[test]
fn manifest_records_shift() {
    let root = tempfile::tempdir().unwrap();
    ok(root.path(), &["generate", "--preset", "combined", "--trials", "2"]);
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(root.path().join("combined/manifest.json")).unwrap()).unwrap();
    let s = &m["shift"];
    assert_eq!(s["scale_factor"], 1.3);
    assert_eq!(s["tilt_angle"], 0.15);
    assert_eq!(s["translation_offset"], serde_json::json!([0.2, -0.1, 0.05]));
    assert!(s["kin_noise_sigma"].as_f64().unwrap() > 0.0);
    assert!(s["vis_shift"]["gain"].as_f64().unwrap() > 0.0);
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 16);
}

#[test]
fn failures_exit_nonzero_with_diagnostic() {
    let root = tempfile::tempdir().unwrap();
    let out = run(root.path(), &["generate", "--preset", "sideways"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("sideways") && err.contains("translation"), "{err}");

    let out = run(root.path(), &["train", "--method", "dann", "--epochs", "0"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("dann"));
}

#[test]
fn zero_epochs_leaves_initialization() {
    let root = tempfile::tempdir().unwrap();
    let r = root.path();
    ok(r, &with(&["train", "--preset", "none", "--method", "baseline-direction", "--epochs", "0"], &["--name", "init"]));
    let ck = Checkpoint::load(&r.join("init/fold0/seed0/checkpoint.json")).unwrap();
    let cfg: ModelConfig = serde_json::from_value(ck.metadata["model"].clone()).unwrap();
    let fresh = Model::new(cfg).unwrap();
    let saved: Vec<Vec<f64>> = ck.tensors.iter().map(|t| t.data.clone()).collect();
    let init: Vec<Vec<f64>> = fresh.tensors().iter().map(|(_, t)| t.data.clone()).collect();
    assert_eq!(saved, init);
}

#[test]
fn log_columns_follow_method() {
    let root = tempfile::tempdir().unwrap();
    let r = root.path();
    let header = |method: &str| {
        ok(r, &with(&["train", "--preset", "combined", "--method", method, "--epochs", "1"], &["--name", method]));
        fs::read_to_string(r.join(method).join("fold0/seed0/train_log.csv")).unwrap().lines().next().unwrap().to_string()
    };
    assert_eq!(header("baseline-position"), "epoch,L_C,source_acc");
    assert_eq!(header("mdok"), "epoch,L_C,L_K-D,source_acc");
    assert_eq!(header("mdok+kvatt"), "epoch,L_C,L_K-D,L_KV-D,source_acc");
}

#[test]
fn evaluate_round_trips_and_checks_hash() {
    let root = tempfile::tempdir().unwrap();
    let r = root.path();
    ok(r, &with(&["train", "--preset", "none", "--method", "mdok+kvatt", "--epochs", "1", "--checkpoint-every", "1"], &["--name", "run"]));
    let ck = r.join("run/fold0/seed0/checkpoint.json");
    assert!(r.join("run/fold0/seed0/checkpoint-epoch1.json").exists());
    let table = ok(r, &["evaluate", "--checkpoint", ck.to_str().unwrap(), "--domain", "simulator"]);
    assert!(table.starts_with("domain,acc_mean"));
    let text = fs::read_to_string(r.join("evaluation/report_simulator.json")).unwrap();
    let report = MetricsReport::from_json(&text).unwrap();
    assert_eq!(MetricsReport::from_json(&report.to_json().unwrap()).unwrap(), report);
    let confusion = fs::read_to_string(r.join("evaluation/confusion_simulator.csv")).unwrap();
    assert_eq!(confusion.lines().count(), 8);

    // A checkpoint whose recorded config no longer matches its hash is rejected.
    let mut bad: serde_json::Value = serde_json::from_str(&fs::read_to_string(&ck).unwrap()).unwrap();
    bad["metadata"]["experiment"]["train"]["epochs"] = 99.into();
    let bad_path = r.join("bad.json");
    fs::write(&bad_path, bad.to_string()).unwrap();
    let out = run(r, &["evaluate", "--checkpoint", bad_path.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("hash"));
}

#[test]
fn training_split_scores_at_least_held_out() {
    let root = tempfile::tempdir().unwrap();
    let r = root.path();
    ok(
        r,
        &[
            "train", "--preset", "none", "--method", "baseline-direction", "--trials", "10", "--hidden", "8", "--max-scale", "3", "--epochs",
            "25", "--lr", "0.005", "--batch", "16", "--seeds", "0", "--folds", "5", "--fold", "0", "--name", "conv",
        ],
    );
    let ck = r.join("conv/fold0/seed0/checkpoint.json");
    let acc = |extra: &[&str], name: &str| {
        let mut args = vec!["evaluate", "--checkpoint", ck.to_str().unwrap(), "--name", name];
        args.extend_from_slice(extra);
        ok(r, &args);
        let rep = MetricsReport::from_json(&fs::read_to_string(r.join(name).join("report_real.json")).unwrap()).unwrap();
        rep.mean.accuracy
    };
    let train = acc(&["--train-split"], "train");
    let test = acc(&[], "test");
    assert!(train >= test, "train {train} < test {test}");
}

#[test]
fn sweep_and_ablate_tables() {
    let root = tempfile::tempdir().unwrap();
    let r = root.path();
    let out = ok(r, &with(&["sweep-lambda", "--preset", "combined", "--epochs", "1", "--lambdas", "0.5"], &[]));
    let rows: Vec<&str> = out.lines().take_while(|l| !l.starts_with("method")).collect();
    assert_eq!(rows[0], "lambda,acc_mean,acc_std");
    assert_eq!(rows.len(), 2);
    let cells: Vec<f64> = rows[1].split(',').map(|c| c.parse().unwrap()).collect();
    assert_eq!(cells[0], 0.5);
    assert!(r.join("lambda-sweep/lambda_sweep.csv").exists());

    let out = ok(r, &with(&["ablate", "--preset", "translation", "--epochs", "1"], &[]));
    let lines: Vec<&str> = out.lines().collect();
    assert!(lines[0].starts_with("method,acc_mean,acc_std,acc_gain"));
    let base: Vec<f64> = lines[1].split(',').skip(1).map(|c| c.parse().unwrap()).collect();
    assert!(lines[1].starts_with("baseline-position,"));
    assert_eq!(base[2], 0.0);
    for line in &lines[2..5] {
        let v: Vec<f64> = line.split(',').skip(1).map(|c| c.parse().unwrap()).collect();
        assert!((v[2] - (v[0] - base[0])).abs() < 0.011, "{line}");
    }
}

#[test]
fn config_file_with_overrides() {
    let root = tempfile::tempdir().unwrap();
    let r = root.path();
    let mut cfg = gesture_uda::experiment::ExperimentConfig::compact("none", gesture_uda::experiment::Method::BaselineDirection);
    cfg.train.epochs = 0;
    let path = r.join("cfg.json");
    fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
    ok(r, &with(&["train", "--config", path.to_str().unwrap()], &["--name", "fromfile"]));
    let written: gesture_uda::experiment::ExperimentConfig =
        serde_json::from_str(&fs::read_to_string(r.join("fromfile/config.json")).unwrap()).unwrap();
    assert_eq!(written.model.encoder.hidden_dim, 6);
    assert_eq!(written.train.epochs, 0);
    assert_eq!(written.seeds, vec![0]);
}
