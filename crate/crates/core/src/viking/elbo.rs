use serde::{Deserialize, Serialize};

use super::kl::{kl, kl_gradient};
use super::posterior::Posterior;
use super::sample::PosteriorSample;
use crate::error::{Error, Result};
use crate::linalg::vector::dot;
use crate::net::{predictive_losses, sample_nll_grad, Batch, ModelSpec, Predictive};

/// Everything the β-ELBO needs besides the posterior, the samples and the
/// batch.
#[derive(Debug, Clone, Copy)]
pub struct ElboContext<'a> {
    pub spec: &'a ModelSpec,
    /// Kernel dimension, already clamped to `[0, D]` and treated as constant.
    pub rank: f64,
    pub beta: f64,
    /// Size of the full training set the batch was drawn from.
    pub n_total: usize,
    pub predictive: Predictive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElboEstimate {
    /// `(N/B) Σ_i (1/S) Σ_s log p(y_i | θ^(s), x_i)`
    pub reconstruction: f64,
    pub kl: f64,
    /// `reconstruction − β·kl`
    pub value: f64,
}

fn penalty(beta: f64, kl: f64) -> f64 {
    // β = 0 switches the KL term off entirely, even for a point posterior
    // whose KL is infinite.
    if beta == 0.0 {
        0.0
    } else {
        beta * kl
    }
}

fn check_samples(samples: &[PosteriorSample]) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::Contract("ELBO needs at least one posterior sample".into()));
    }
    Ok(())
}

/// Monte Carlo β-ELBO on one mini-batch, scaled to the full dataset.
pub fn elbo_estimate(
    posterior: &Posterior,
    samples: &[PosteriorSample],
    batch: &Batch,
    ctx: &ElboContext<'_>,
) -> Result<ElboEstimate> {
    check_samples(samples)?;
    let mut mean_nll = 0.0;
    for s in samples {
        let losses = predictive_losses(ctx.spec, &posterior.theta_hat, &s.theta, batch, ctx.predictive)?;
        mean_nll += losses.iter().sum::<f64>() / losses.len() as f64;
    }
    mean_nll /= samples.len() as f64;
    let reconstruction = -(ctx.n_total as f64) * mean_nll;
    let kl = kl(posterior, ctx.rank, posterior.dim())?;
    Ok(ElboEstimate {
        reconstruction,
        kl,
        value: reconstruction - penalty(ctx.beta, kl),
    })
}

/// Gradient of the training objective `−ELBO / N` over the concatenated
/// variational parameters `[θ̂, log α, log σ_im]`.
///
/// Noise directions are frozen: gradients reach `log α` and `log σ_im` only
/// through `θ^(s) = θ̂ + σ_ker ε_ker + σ_im ε_im`.
pub fn elbo_gradient(
    posterior: &Posterior,
    samples: &[PosteriorSample],
    batch: &Batch,
    ctx: &ElboContext<'_>,
) -> Result<(ElboEstimate, Vec<f64>)> {
    check_samples(samples)?;
    let d = posterior.dim();
    let sk = posterior.sigma_ker();
    let si = posterior.sigma_im();

    let mut grad: Vec<f64> = Vec::new();
    let mut d_log_alpha = 0.0;
    let mut d_log_sigma_im = 0.0;
    let mut mean_nll = 0.0;
    for s in samples {
        let sg = sample_nll_grad(ctx.spec, &posterior.theta_hat, &s.theta, batch, ctx.predictive)?;
        mean_nll += sg.mean_nll;
        if grad.is_empty() {
            grad = sg.d_theta_hat;
        } else {
            for (g, v) in grad.iter_mut().zip(&sg.d_theta_hat) {
                *g += v;
            }
        }
        // ∂θ/∂log α = −½ σ_ker ε_ker ; ∂θ/∂log σ_im = σ_im ε_im
        if sk != 0.0 {
            d_log_alpha += -0.5 * sk * dot(&sg.d_displacement, &s.eps_ker);
        }
        if si != 0.0 {
            d_log_sigma_im += si * dot(&sg.d_displacement, &s.eps_im);
        }
    }
    let count = samples.len();
    if count > 1 {
        let inv = 1.0 / count as f64;
        grad.iter_mut().for_each(|g| *g *= inv);
        d_log_alpha *= inv;
        d_log_sigma_im *= inv;
        mean_nll *= inv;
    }

    let kl_value = kl(posterior, ctx.rank, d)?;
    if ctx.beta != 0.0 {
        let w = ctx.beta / ctx.n_total as f64;
        let kg = kl_gradient(posterior, ctx.rank, d)?;
        for (g, k) in grad.iter_mut().zip(&kg.d_theta_hat) {
            *g += w * k;
        }
        d_log_alpha += w * kg.d_log_alpha;
        d_log_sigma_im += w * kg.d_log_sigma_im;
    }
    grad.push(d_log_alpha);
    grad.push(d_log_sigma_im);

    let reconstruction = -(ctx.n_total as f64) * mean_nll;
    Ok((
        ElboEstimate {
            reconstruction,
            kl: kl_value,
            value: reconstruction - penalty(ctx.beta, kl_value),
        },
        grad,
    ))
}
