//! Variance-based OOD scores and AUROC: in-distribution validation blobs
//! against a wide cloud centred on the decision boundary.

use std::path::Path;

use viking::cli::{load_data_source, RunConfig};
use viking::metrics::auroc;
use viking::train::{evaluate, posterior_samples, train_mode, Mode, TrainData};

fn main() -> viking::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs");
    let cfg = RunConfig::load(&dir.join("blobs.toml"))?;
    let data = cfg.data.load()?;
    let t = &cfg.train;
    let val = data.val.clone().expect("blobs config holds out half the rows");
    let mut ood = load_data_source(&dir.join("ood.toml"))?.raw().load()?.all()?;
    if let Some(s) = &data.standardizer {
        ood.inputs = s.apply(&ood.inputs);
    }
    let split = TrainData::new(data.train.clone(), Some(val.clone()));
    for mode in [Mode::WarmupOnly, Mode::FullViking] {
        let (post, _) = train_mode(&cfg.model, &split, t, &cfg.model.init_params(t.seed), mode, &mut ())?;
        let samples = posterior_samples(&cfg.model, &post, &data.train, t, t.eval_samples, t.seed)?;
        let inside = evaluate(&cfg.model, &post, &samples, &val, t.predictive)?.ood_scores()?;
        let outside = evaluate(&cfg.model, &post, &samples, &ood, t.predictive)?.ood_scores()?;
        println!("{}: AUROC {:.4} over {} + {} points", mode.name(), auroc(&inside, &outside)?, inside.len(), outside.len());
    }
    Ok(())
}
