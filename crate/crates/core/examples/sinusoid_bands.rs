//! Trains the sinusoid preset and prints the predictive mean and standard
//! deviation over the evaluation grid. Pass a path to also write them as CSV.

use std::path::Path;

use viking::cli::{bands_csv, RunConfig};
use viking::train::{posterior_samples, sample_predictions, train_mode, TrainData};

fn main() -> viking::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs/sinusoid.toml");
    let cfg = RunConfig::load(&path)?;
    let data = cfg.data.load()?;
    let t = &cfg.train;
    let split = TrainData::new(data.train.clone(), data.val.clone());
    let (post, _) = train_mode(&cfg.model, &split, t, &cfg.model.init_params(t.seed), cfg.mode, &mut ())?;
    println!("σ_ker = {:.4}, σ_im = {:.4}", post.sigma_ker(), post.sigma_im());

    let grid = data.grid.expect("sinusoid data come with a grid");
    let samples = posterior_samples(&cfg.model, &post, &data.train, t, t.eval_samples, t.seed)?;
    let outputs = sample_predictions(&cfg.model, &post, &samples, &grid, t.predictive)?;
    let csv = bands_csv(&grid, &outputs)?;
    let text = String::from_utf8_lossy(&csv);
    for (i, line) in text.lines().enumerate() {
        if i == 0 || i % 20 == 1 {
            println!("{line}");
        }
    }
    if let Some(out) = std::env::args().nth(1) {
        std::fs::write(&out, csv)?;
        println!("wrote {out}");
    }
    Ok(())
}
