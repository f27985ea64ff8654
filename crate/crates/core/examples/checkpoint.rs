//! Trains a small regression posterior, saves it as a checkpoint, loads it
//! back and checks the reloaded posterior scores identically.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use viking::net::{Activation, Batch, LossKind, ModelSpec, Targets};
use viking::train::{evaluate, posterior_samples, train_mode, Mode, TrainConfig, TrainData};
use viking::viking::Checkpoint;
use viking::Result;

fn main() -> Result<()> {
    let spec = ModelSpec::mlp(&[1, 16, 1], Activation::Tanh, LossKind::GaussianRegression { noise_std: 0.1 })?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let x = viking::metrics::Mat::from_fn(40, 1, |i, _| -2.0 + 4.0 * i as f64 / 39.0);
    let y = x.map(|v| {
        let z: f64 = StandardNormal.sample(&mut rng);
        v.sin() + 0.1 * z
    });
    let data = Batch::new(x, Targets::Values(y))?;
    let cfg = TrainConfig { warmup_epochs: 200, elbo_epochs: 50, seed: 1, ..TrainConfig::default() };
    let (post, _) = train_mode(&spec, &TrainData::new(data.clone(), None), &cfg, &spec.init_params(1), Mode::FullViking, &mut ())?;

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("run.vkck");
    Checkpoint::new(spec.clone(), post.clone(), cfg.seed)?.save(&path)?;
    let back = Checkpoint::load(&path)?;
    println!("saved {} bytes, fingerprint {:016x}", std::fs::metadata(&path)?.len(), back.spec.fingerprint());
    println!("log α = {:.4}, log σ_im = {:.4}", back.posterior.log_alpha, back.posterior.log_sigma_im);

    let score = |p| -> Result<f64> {
        let s = posterior_samples(&spec, p, &data, &cfg, cfg.eval_samples, cfg.seed)?;
        Ok(evaluate(&spec, p, &s, &data, cfg.predictive)?.metrics.get("nll").unwrap())
    };
    let (a, b) = (score(&post)?, score(&back.posterior)?);
    println!("train NLL before save {a:.6}, after load {b:.6}, identical: {}", a == b);
    Ok(())
}
