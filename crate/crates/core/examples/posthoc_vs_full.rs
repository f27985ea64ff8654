//! Post-hoc σ tuning around the MLE mean against full ELBO training of the
//! mean and both scales, with the same epoch budget after warmup.

use viking::data::{make_blobs, split, BlobsConfig, SplitSpec};
use viking::net::{Activation, LossKind, ModelSpec};
use viking::train::{evaluate, posterior_samples, train_mode, Mode, TrainConfig, TrainData};

fn main() -> viking::Result<()> {
    let spec = ModelSpec::mlp(&[2, 16, 2], Activation::Tanh, LossKind::Categorical)?;
    for seed in 0..3 {
        let blobs = BlobsConfig { n_per_class: 200, seed, ..BlobsConfig::default() };
        let s = split(&make_blobs(&blobs)?, &SplitSpec { train_fraction: 0.5, seed, standardize: true })?;
        let val = s.val.clone().expect("half the rows are held out");
        let data = TrainData::new(s.train.clone(), Some(val.clone()));
        let cfg = TrainConfig {
            warmup_lr: 1e-5,
            elbo_epochs: 15,
            init_log_alpha: 4.0,
            seed,
            ..TrainConfig::default()
        };
        let mut line = format!("seed {seed}:");
        for mode in [Mode::WarmupOnly, Mode::Posthoc, Mode::FullViking] {
            let (post, _) = train_mode(&spec, &data, &cfg, &spec.init_params(seed), mode, &mut ())?;
            let samples = posterior_samples(&spec, &post, &s.train, &cfg, cfg.eval_samples, seed)?;
            let nll = evaluate(&spec, &post, &samples, &val, cfg.predictive)?.metrics.get("nll").unwrap();
            line += &format!("  {} val NLL {nll:.4}", mode.name());
        }
        println!("{line}");
    }
    Ok(())
}
