//! Drives the `viking` binary end to end.

use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"
out = "unused"

[model]
layer_sizes = [2, 8, 2]
activations = ["tanh"]
loss = { kind = "categorical" }

[data]
kind = "blobs"
generator = { n_per_class = 40 }
split = { train_fraction = 0.75 }

[train]
warmup_epochs = 3
sigma_tune_epochs = 1
elbo_epochs = 2
batch_size = 16
cg_iters = 40
cg_tol = 1e-12
"#;

const OOD: &str = r#"
kind = "blobs"
generator = { n_per_class = 30, separation = 0.0, spread = 4.0, seed = 5 }
"#;

fn viking(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_viking")).args(args).output().unwrap()
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn train_eval_and_project_demo() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, CONFIG).unwrap();
    std::fs::write(dir.path().join("ood.toml"), OOD).unwrap();
    let out = dir.path().join("out");

    let train = viking(&[
        "train",
        "--config",
        arg(&cfg),
        "--out",
        arg(&out),
        "--seed",
        "4",
        "--mode",
        "posthoc",
        "--eval-samples",
        "7",
    ]);
    assert!(train.status.success(), "{}", text(&train.stderr));
    assert!(text(&train.stdout).starts_with("trained posthoc (6 epochs)"));
    for f in ["checkpoint.vkck", "train_log.jsonl", "metrics.json", "config.toml"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let written = std::fs::read_to_string(out.join("config.toml")).unwrap();
    assert!(written.contains("seed = 4") && written.contains("eval_samples = 7"));
    assert!(written.contains("mode = \"posthoc\""));
    assert_eq!(std::fs::read_to_string(out.join("train_log.jsonl")).unwrap().lines().count(), 6);

    let ood = dir.path().join("ood.toml");
    let eval = viking(&["eval", "--config", arg(&cfg), "--out", arg(&out), "--ood-data", arg(&ood)]);
    assert!(eval.status.success(), "{}", text(&eval.stderr));
    assert!(text(&eval.stdout).contains("ood.auroc"));
    let metrics: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("eval_metrics.json")).unwrap()).unwrap();
    let auroc = metrics["ood.auroc"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&auroc));

    let demo = viking(&["project-demo", "--config", arg(&cfg), "--out", arg(&out)]);
    assert!(demo.status.success(), "{}", text(&demo.stderr));
    let diag: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("project_demo.json")).unwrap()).unwrap();
    assert!(diag["oracle_deviation"].as_f64().unwrap() <= 1e-5);
    assert_eq!(diag["dim"].as_f64().unwrap(), 42.0);
}

#[test]
fn bad_config_fails_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, CONFIG.replace("warmup_epochs = 3", "warmup_epochs = \"three\"")).unwrap();
    let run = viking(&["train", "--config", arg(&cfg)]);
    assert!(!run.status.success());
    let err = text(&run.stderr);
    assert!(err.starts_with("error:") && err.contains("bad.toml:15:"), "{err}");
}

#[test]
fn unknown_mode_is_a_usage_error() {
    let run = viking(&["train", "--config", "x.toml", "--mode", "laplace"]);
    assert!(!run.status.success());
    assert!(text(&run.stderr).contains("laplace"));
}
