//! End-to-end runs of the binary.

use std::path::Path;
use std::process::{Command, Output};

fn rfwb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rfwb")).args(args).output().unwrap()
}

fn json_line(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stdout);
    serde_json::from_str(text.lines().last().unwrap()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

const MIXTURE: &str = r#"
kind = "mixture"
k = 2
d = 8
p = 2
tokens_per_sample = 4
noise_std = 0.05
classes = 2
samples_per_class = 60
seed = 3
"#;

const RUN: &str = r#"
[model]
depth = 1
token_dim = 8
heads = 2
subspace_dim = 2
mlp_variant = "rf-mlp"
relu_variant = "crelu"
epsilon = 1.0
lambda = 0.1
kappa = 1.0

[model.patch]
input_shape = [4, 8]

[model.patch.mode]
kind = "time_series"
window = 1
stride = 1

[model.head]
kind = "classify"
num_classes = 2

[train]
lr_init = 0.01
max_epochs = 40
batch_size = 16
seed = 2
"#;

#[test]
fn synth_train_eval_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("mix.toml");
    let run = dir.path().join("run.toml");
    let data = dir.path().join("mix.rfds");
    let ckpt = dir.path().join("model.rfck");
    let tables = dir.path().join("tables");
    std::fs::write(&spec, MIXTURE).unwrap();
    std::fs::write(&run, RUN).unwrap();

    let out = rfwb(&["synth", "--spec", path(&spec), "--out", path(&data)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json_line(&out)["samples"], 120);

    let out = rfwb(&["train", "--config", path(&run), "--data", path(&data), "--out", path(&ckpt)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json_line(&out);
    assert!(report["test"]["accuracy"].as_f64().unwrap() >= 0.9, "{report}");
    let history = std::fs::read_to_string(dir.path().join("model.rfck.history.jsonl")).unwrap();
    assert_eq!(history.lines().count() as u64, report["epochs"].as_u64().unwrap());

    let out = rfwb(&["eval", "--ckpt", path(&ckpt), "--data", path(&data)]);
    assert!(out.status.success());
    assert_eq!(json_line(&out)["metrics"]["samples"], 120);

    let out = rfwb(&["analyze", "--ckpt", path(&ckpt), "--data", path(&data), "--out", path(&tables)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["correlation.csv", "sparsity.csv", "sparsity_summary.csv", "occupancy.csv"] {
        assert!(tables.join(name).is_file(), "{name}");
    }
}

#[test]
fn errors_are_json_with_exit_codes() {
    let out = rfwb(&["gradcheck", "--size", "3,3"]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "usage");

    let out = rfwb(&["eval", "--ckpt", "/nonexistent/model.rfck", "--data", "/nonexistent/data.rfds"]);
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["message"].as_str().unwrap().contains("nonexistent"));
}

#[test]
fn gradcheck_prints_one_line_per_check() {
    let out = rfwb(&["gradcheck", "--seed", "4"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().count() >= 10);
    assert!(text.lines().all(|l| l.starts_with("PASS ") || l.starts_with("SKIP ")));
}
