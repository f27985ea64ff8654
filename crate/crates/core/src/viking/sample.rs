use serde::{Deserialize, Serialize};

use super::noise::ProjectionState;
use super::posterior::Posterior;
use crate::linalg::vector::dot;
use crate::net::ParamVector;

/// A posterior draw together with the (frozen) noise directions that
/// produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSample {
    pub theta: ParamVector,
    pub eps_ker: Vec<f64>,
    pub eps_im: Vec<f64>,
}

/// `θ^(s) = θ̂ + σ_ker·ε_ker^(s,t) + σ_im·ε_im^(s)` with
/// `ε_im^(s) = ε^(s,0) − ε_ker^(s,t)`.
pub fn draw_sample(posterior: &Posterior, state: &ProjectionState, s: usize) -> PosteriorSample {
    let eps_ker = state.eps_ker(s).to_vec();
    let eps_im: Vec<f64> = state
        .eps0(s)
        .iter()
        .zip(&eps_ker)
        .map(|(e0, ek)| e0 - ek)
        .collect();
    compose(posterior, eps_ker, eps_im)
}

/// Builds a sample from explicit kernel and image directions.
pub fn compose(posterior: &Posterior, eps_ker: Vec<f64>, eps_im: Vec<f64>) -> PosteriorSample {
    let sk = posterior.sigma_ker();
    let si = posterior.sigma_im();
    let theta = posterior
        .theta_hat
        .iter()
        .zip(eps_ker.iter().zip(&eps_im))
        .map(|(t, (k, i))| t + sk * k + si * i)
        .collect::<Vec<_>>();
    PosteriorSample {
        theta: ParamVector::new(theta),
        eps_ker,
        eps_im,
    }
}

pub fn draw_all(posterior: &Posterior, state: &ProjectionState) -> Vec<PosteriorSample> {
    (0..state.samples())
        .map(|s| draw_sample(posterior, state, s))
        .collect()
}

/// Hutchinson estimate of the kernel dimension. Downstream code treats it
/// as a constant: no gradient ever flows through it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankEstimate {
    pub r_hat: f64,
    pub samples: usize,
}

impl RankEstimate {
    /// The estimate clamped to `[0, dim]`, as used by the KL term.
    pub fn clamped(&self, dim: usize) -> f64 {
        self.r_hat.clamp(0.0, dim as f64)
    }
}

/// `R̂ = (1/S) Σ_s ⟨ε^(s), ε_ker^(s)⟩`.
pub fn estimate_rank<'a>(pairs: impl IntoIterator<Item = (&'a [f64], &'a [f64])>) -> RankEstimate {
    let (sum, samples) = pairs
        .into_iter()
        .fold((0.0, 0usize), |(acc, n), (e, k)| (acc + dot(e, k), n + 1));
    RankEstimate {
        r_hat: if samples == 0 { 0.0 } else { sum / samples as f64 },
        samples,
    }
}
