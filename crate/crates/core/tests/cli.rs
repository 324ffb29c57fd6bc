use std::fs;
use std::path::Path;
use std::process::Command;

use deeponet::experiments::ExperimentReport;

fn cli(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_deeponet")).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn report(path: &Path) -> ExperimentReport {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const RUN: &str = r#"
model_seed = 2
[data]
m = 12
train_u = 40
test_u = 20
train_points = 1
test_points = 1
seed = 5
[data.problem]
kind = "antiderivative"
[data.space]
kind = "grf"
length_scale = 0.2
[model]
kind = "deeponet"
variant = "unstacked"
trunk_depth = 2
trunk_width = 8
branch_depth = 2
branch_width = 8
bias = true
[train]
iterations = 60
lr = 0.001
batch = { size = 16 }
seed = 1
eval_every = 20
test_trim = 0.0
"#;

#[test]
fn gen_train_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = d.join("data");
    let out = cli(&[
        "gen-data", "--problem", "pendulum", "--m", "8", "--train-u", "30", "--test-u", "10", "--csv", "--out",
        data.to_str().unwrap(),
    ]);
    assert!(out.contains("30 records"), "{out}");
    assert!(data.join("train.opds").exists() && data.join("test.csv").exists());

    let cfg = d.join("run.toml");
    fs::write(&cfg, RUN).unwrap();
    let run_dir = d.join("run");
    cli(&["train", "--config", cfg.to_str().unwrap(), "--out", run_dir.to_str().unwrap()]);
    let rep = report(&run_dir.join("report.json"));
    assert_eq!(rep.history.len(), 4);
    let history = fs::read_to_string(run_dir.join("history.csv")).unwrap();
    assert!(history.starts_with("iteration,train_mse,test_mse\n"));
    assert_eq!(history.lines().count(), 5);

    // retraining from the saved config reproduces the report
    let again = d.join("again");
    cli(&["train", "--config", run_dir.join("config.toml").to_str().unwrap(), "--out", again.to_str().unwrap()]);
    let rep2 = report(&again.join("report.json"));
    assert_eq!(rep.history, rep2.history);
    assert_eq!(rep.config_hash, rep2.config_hash);

    let gen = d.join("gen");
    cli(&["gen-data", "--config", cfg.to_str().unwrap(), "--out", gen.to_str().unwrap()]);
    let out = cli(&[
        "eval", "--model", run_dir.join("model.bin").to_str().unwrap(), "--data", gen.join("test.opds").to_str().unwrap(),
        "--out", d.join("pred.csv").to_str().unwrap(),
    ]);
    let mse: f64 = out.split_whitespace().last().unwrap().parse().unwrap();
    assert!((mse - rep.final_test_mse).abs() <= 1e-6 * rep.final_test_mse, "{mse} vs {}", rep.final_test_mse);
    assert_eq!(fs::read_to_string(d.join("pred.csv")).unwrap().lines().count(), 21);
}

#[test]
fn preset_writes_sweep_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let ov = d.join("ov.toml");
    fs::write(&ov, "iterations = 30\neval_every = 10\ntrain_u = 30\ntest_u = 15\nvalues = [2.0, 3.0, 4.0, 5.0]\n").unwrap();
    let out = cli(&[
        "preset", "pendulum_sensors", "--desk", "--runs", "2", "--seed", "3", "--config", ov.to_str().unwrap(), "--out",
        d.to_str().unwrap(),
    ]);
    assert!(out.contains("note: desk scale"), "{out}");
    let root = d.join("pendulum_sensors");
    let summary = fs::read_to_string(root.join("sensors/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 5);
    assert!(root.join("sensors/fits.csv").exists());
    assert!(fs::read_to_string(root.join("sensors/plot.py")).unwrap().contains("summary.csv"));
    assert!(root.join("preset.json").exists());
    let run = root.join("sensors/default/x3_run1");
    let rep = report(&run.join("report.json"));
    assert_eq!(rep.seeds["data"], 4);
    assert!(rep.notes.iter().any(|n| n.starts_with("desk scale")));

    // a run reproduces from its recorded config
    let replay = d.join("replay");
    cli(&["train", "--config", run.join("config.toml").to_str().unwrap(), "--out", replay.to_str().unwrap()]);
    let rep2 = report(&replay.join("report.json"));
    assert_eq!(rep2.config_hash, rep.config_hash);
    assert_eq!(rep2.history, rep.history);

    let fits = cli(&["fit-rates", root.join("sensors/summary.csv").to_str().unwrap()]);
    assert!(fits.contains("default,exponential,"), "{fits}");
}

#[test]
fn bad_input_is_rejected() {
    for args in [
        vec!["preset", "no_such_preset", "--out", "/tmp"],
        vec!["train", "--config", "/nonexistent.toml"],
    ] {
        let out = Command::new(env!("CARGO_BIN_EXE_deeponet")).args(&args).output().unwrap();
        assert!(!out.status.success());
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    }
}
