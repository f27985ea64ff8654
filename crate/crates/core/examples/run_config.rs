//! Builds a run config in code, runs the `train` and `eval` commands on it
//! and lists what they wrote.

use viking::cli::{cmd_eval, cmd_train, RunConfig};

const CONFIG: &str = r#"
mode = "full-viking"

[model]
layer_sizes = [2, 12, 2]
activations = ["elu"]
loss = { kind = "categorical" }

[data]
kind = "blobs"
generator = { n_per_class = 60, separation = 3.0 }
split = { train_fraction = 0.7 }

[train]
warmup_epochs = 30
warmup_lr = 0.01
elbo_epochs = 10
batch_size = 32
"#;

fn main() -> viking::Result<()> {
    let dir = tempfile::tempdir()?;
    let mut cfg = RunConfig::from_toml(CONFIG)?;
    cfg.out = dir.path().join("run");
    cfg.validate()?;
    let summary = cmd_train(&cfg)?;
    println!("trained {} epochs", summary.epochs);
    for (k, v) in &summary.metrics.0 {
        println!("  {k} = {v:.4}");
    }
    let eval = cmd_eval(&cfg, None, None)?;
    println!("re-evaluated from checkpoint: val accuracy {:.4}", eval.get("val.accuracy").unwrap_or(f64::NAN));
    let mut files: Vec<_> = std::fs::read_dir(&summary.out)?.map(|e| e.map(|e| e.file_name())).collect::<Result<_, _>>()?;
    files.sort();
    println!("wrote {files:?}");
    println!("\neffective config:\n{}", cfg.to_toml()?);
    Ok(())
}
