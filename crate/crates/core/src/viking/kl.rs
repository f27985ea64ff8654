//! Closed-form `KL(q ‖ p)` for the two-scale posterior against an isotropic
//! Gaussian prior.
//!
//! `Σ` has `R` eigenvalues `σ_ker²` and `D − R` eigenvalues `σ_im²`, so
//! `tr Σ = σ_ker² R + σ_im² (D − R)` and
//! `log det Σ = 2R log σ_ker + 2(D − R) log σ_im`. Everything is evaluated
//! from logarithms, and a term whose multiplicity is zero is dropped so
//! that degenerate scales on an empty subspace do not produce `0·∞`.

use super::posterior::Posterior;
use crate::error::{Error, Result};

fn weighted(count: f64, value: f64) -> f64 {
    if count == 0.0 {
        0.0
    } else {
        count * value
    }
}

fn check_rank(r: f64, d: usize) -> Result<()> {
    if !(0.0..=d as f64).contains(&r) {
        return Err(Error::Contract(format!("kernel rank {r} outside [0, {d}]")));
    }
    Ok(())
}

/// KL with independent kernel and image scales (the prior precision is not
/// tied to `σ_ker`).
pub fn kl_untied(
    log_alpha: f64,
    log_sigma_ker: f64,
    log_sigma_im: f64,
    theta_norm_sq: f64,
    r: f64,
    d: usize,
) -> Result<f64> {
    check_rank(r, d)?;
    let df = d as f64;
    let alpha = log_alpha.exp();
    let trace = weighted(r, (2.0 * log_sigma_ker).exp()) + weighted(df - r, (2.0 * log_sigma_im).exp());
    let logdet = weighted(2.0 * r, log_sigma_ker) + weighted(2.0 * (df - r), log_sigma_im);
    Ok(0.5 * (alpha * trace - df + alpha * theta_norm_sq - df * log_alpha - logdet))
}

/// `∂KL/∂log σ_ker` of [`kl_untied`] with everything else fixed.
pub fn kl_untied_grad_log_sigma_ker(log_alpha: f64, log_sigma_ker: f64, r: f64) -> f64 {
    weighted(r, log_alpha.exp() * (2.0 * log_sigma_ker).exp() - 1.0)
}

/// KL of the tied posterior (`σ_ker² = 1/α`) at kernel rank `r`.
pub fn kl(posterior: &Posterior, r: f64, d: usize) -> Result<f64> {
    if posterior.dim() != d {
        return Err(Error::Shape(format!(
            "posterior has {} parameters, KL asked for {d}",
            posterior.dim()
        )));
    }
    let norm_sq: f64 = posterior.theta_hat.iter().map(|v| v * v).sum();
    kl_untied(
        posterior.log_alpha,
        -0.5 * posterior.log_alpha,
        posterior.log_sigma_im,
        norm_sq,
        r,
        d,
    )
}

/// Gradient of the tied KL with `r` held constant.
#[derive(Debug, Clone, PartialEq)]
pub struct KlGradient {
    /// Equals `α θ̂`.
    pub d_theta_hat: Vec<f64>,
    pub d_log_alpha: f64,
    pub d_log_sigma_im: f64,
}

pub fn kl_gradient(posterior: &Posterior, r: f64, d: usize) -> Result<KlGradient> {
    check_rank(r, d)?;
    let df = d as f64;
    let alpha = posterior.alpha();
    let im_var = (2.0 * posterior.log_sigma_im).exp();
    let norm_sq: f64 = posterior.theta_hat.iter().map(|v| v * v).sum();
    // With σ_ker² = 1/α the kernel terms contribute R/2·(1 + log α − 1)
    // in log α, leaving only the image and mean terms to differentiate.
    let d_log_alpha = 0.5 * (weighted(df - r, alpha * im_var - 1.0) + alpha * norm_sq);
    let d_log_sigma_im = weighted(df - r, alpha * im_var - 1.0);
    Ok(KlGradient {
        d_theta_hat: posterior.theta_hat.iter().map(|t| alpha * t).collect(),
        d_log_alpha,
        d_log_sigma_im,
    })
}
