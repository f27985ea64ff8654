//! Reliability table, ECE and MCE of a VIKING classifier on held-out blobs.

use std::path::Path;

use viking::cli::RunConfig;
use viking::metrics::{bin_index, calibration, mean_predictive};
use viking::net::Targets;
use viking::train::{evaluate, posterior_samples, train_mode, TrainData};

fn main() -> viking::Result<()> {
    let cfg = RunConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs/blobs.toml"))?;
    let data = cfg.data.load()?;
    let t = &cfg.train;
    let val = data.val.clone().expect("blobs config holds out half the rows");
    let split = TrainData::new(data.train.clone(), Some(val.clone()));
    let (post, _) = train_mode(&cfg.model, &split, t, &cfg.model.init_params(t.seed), cfg.mode, &mut ())?;
    let samples = posterior_samples(&cfg.model, &post, &data.train, t, t.eval_samples, t.seed)?;
    let eval = evaluate(&cfg.model, &post, &samples, &val, t.predictive)?;
    let probs = mean_predictive(&eval.outputs)?;
    let Targets::Labels(labels) = &val.targets else { unreachable!() };

    let bins = 10;
    let mut table = vec![(0usize, 0.0, 0.0); bins];
    for (row, &y) in probs.row_iter().zip(labels) {
        let (pred, conf) = row.iter().enumerate().fold((0, 0.0), |b, (i, &p)| if p > b.1 { (i, p) } else { b });
        let e = &mut table[bin_index(conf, bins)];
        e.0 += 1;
        e.1 += conf;
        e.2 += f64::from(u8::from(pred == y));
    }
    println!("bin        count  confidence  accuracy");
    for (b, (n, conf, hits)) in table.iter().enumerate().filter(|(_, e)| e.0 > 0) {
        let nf = *n as f64;
        println!("[{:.1}, {:.1})  {n:5}  {:10.3}  {:8.3}", b as f64 / 10.0, (b + 1) as f64 / 10.0, conf / nf, hits / nf);
    }
    let cal = calibration(&probs, labels, bins)?;
    println!("ECE = {:.4}, MCE = {:.4}", cal.ece, cal.mce);
    Ok(())
}
