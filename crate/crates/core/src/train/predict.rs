use super::{ordered_batches, stream_rng, TrainConfig, EVAL_STREAM};
use crate::error::Result;
use crate::metrics::{
    calibration, classification_metrics, mean_predictive, ood_scores, regression_bands, regression_metrics,
    softmax_rows, Mat, MetricsRecord, DEFAULT_BINS,
};
use crate::net::{predict, Batch, LossKind, ModelSpec, Predictive, Targets};
use crate::viking::{draw_all, init_kernel_noise, Posterior, PosteriorSample};

/// Draws `count` posterior samples after one fresh projection pass over the
/// training data at the final `θ̂`.
pub fn posterior_samples(
    spec: &ModelSpec,
    posterior: &Posterior,
    train: &Batch,
    cfg: &TrainConfig,
    count: usize,
    seed: u64,
) -> Result<Vec<PosteriorSample>> {
    let d = posterior.dim();
    if posterior.is_point_mass() {
        let point = PosteriorSample {
            theta: posterior.theta_hat.clone(),
            eps_ker: vec![0.0; d],
            eps_im: vec![0.0; d],
        };
        return Ok(vec![point; count]);
    }
    let batches = ordered_batches(train, cfg.batch_size);
    let state = init_kernel_noise(
        posterior,
        &batches,
        spec,
        cfg.jacobian,
        &cfg.cg(),
        count,
        cfg.projection_passes,
        cfg.gamma,
        stream_rng(seed, EVAL_STREAM),
    )?;
    Ok(draw_all(posterior, &state))
}

/// Raw network outputs for each sample.
pub fn sample_predictions(
    spec: &ModelSpec,
    posterior: &Posterior,
    samples: &[PosteriorSample],
    inputs: &Mat,
    predictive: Predictive,
) -> Result<Vec<Mat>> {
    samples
        .iter()
        .map(|s| predict(spec, &posterior.theta_hat, &s.theta, inputs, predictive))
        .collect()
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub metrics: MetricsRecord,
    /// Per-sample class probabilities, or raw outputs for regression.
    pub outputs: Vec<Mat>,
}

impl Evaluation {
    /// Per-input OOD scores; classification only.
    pub fn ood_scores(&self) -> Result<Vec<f64>> {
        ood_scores(&self.outputs)
    }
}

pub fn evaluate(
    spec: &ModelSpec,
    posterior: &Posterior,
    samples: &[PosteriorSample],
    batch: &Batch,
    predictive: Predictive,
) -> Result<Evaluation> {
    batch.check(spec)?;
    let raw = sample_predictions(spec, posterior, samples, &batch.inputs, predictive)?;
    let (mut metrics, outputs) = match (&spec.loss, &batch.targets) {
        (LossKind::Categorical, Targets::Labels(y)) => {
            let probs: Vec<Mat> = raw.iter().map(softmax_rows).collect();
            let mean = mean_predictive(&probs)?;
            let mut metrics: MetricsRecord = classification_metrics(&mean, y)?.into();
            let cal = calibration(&mean, y, DEFAULT_BINS)?;
            metrics.insert("ece", cal.ece);
            metrics.insert("mce", cal.mce);
            if probs.len() >= 2 {
                let scores = ood_scores(&probs)?;
                metrics.insert("mean_ood_score", scores.iter().sum::<f64>() / scores.len() as f64);
            }
            (metrics, probs)
        }
        (LossKind::GaussianRegression { noise_std }, Targets::Values(y)) => {
            let mut metrics: MetricsRecord = regression_metrics(&raw, y, *noise_std)?.into();
            if raw.len() >= 2 {
                let bands = regression_bands(&raw)?;
                metrics.insert("mean_std", bands.std.mean());
            }
            (metrics, raw)
        }
        _ => unreachable!("batch.check rejects mismatched targets"),
    };
    metrics.insert("samples", samples.len() as f64);
    Ok(Evaluation { metrics, outputs })
}
