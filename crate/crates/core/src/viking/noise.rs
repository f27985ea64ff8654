//! Kernel-noise vectors evolved by (stochastic) alternating projections.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::posterior::Posterior;
use crate::error::{Error, Result};
use crate::linalg::{kernel_project, CgOptions, CgReport, DenseRows, LinearMap};
use crate::net::{jacobian_rows, Batch, JacobianKind, ModelSpec};

fn standard_normal(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| StandardNormal.sample(rng)).collect()
}

/// Per-sample noise for one epoch: the epoch-initial draws `ε^(s,0)` and the
/// current kernel noise `ε_ker^(s,t)`.
#[derive(Debug, Clone)]
pub struct ProjectionState {
    eps0: Vec<Vec<f64>>,
    eps_ker: Vec<Vec<f64>>,
    gamma: f64,
    rng: ChaCha8Rng,
}

impl ProjectionState {
    /// Draws `samples` fresh `ε^(s,0) ~ N(0, I_dim)`; kernel noise starts
    /// equal to them until projected.
    pub fn draw(samples: usize, dim: usize, gamma: f64, mut rng: ChaCha8Rng) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::Contract(format!("gamma must lie in [0, 1], got {gamma}")));
        }
        if samples == 0 {
            return Err(Error::Contract("need at least one Monte Carlo sample".into()));
        }
        let eps0: Vec<Vec<f64>> = (0..samples).map(|_| standard_normal(&mut rng, dim)).collect();
        Ok(Self {
            eps_ker: eps0.clone(),
            eps0,
            gamma,
            rng,
        })
    }

    pub fn from_seed(samples: usize, dim: usize, gamma: f64, seed: u64) -> Result<Self> {
        Self::draw(samples, dim, gamma, ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn samples(&self) -> usize {
        self.eps0.len()
    }

    pub fn dim(&self) -> usize {
        self.eps0.first().map_or(0, Vec::len)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn eps0(&self, s: usize) -> &[f64] {
        &self.eps0[s]
    }

    pub fn eps_ker(&self, s: usize) -> &[f64] {
        &self.eps_ker[s]
    }

    /// `(ε^(s,0), ε_ker^(s,t))` for every sample.
    pub fn pairs(&self) -> impl Iterator<Item = (&[f64], &[f64])> {
        self.eps0
            .iter()
            .zip(&self.eps_ker)
            .map(|(a, b)| (a.as_slice(), b.as_slice()))
    }

    /// Replaces the kernel noise of every sample by its projection onto
    /// `ker(j)`.
    pub fn project_all<M: LinearMap>(&mut self, j: &M, cg: &CgOptions) -> Result<Vec<CgReport>> {
        self.eps_ker
            .iter_mut()
            .map(|e| {
                let (p, rep) = kernel_project(j, e, cg)?;
                *e = p;
                Ok(rep)
            })
            .collect()
    }

    /// One stochastic alternating-projection step:
    /// `ε_ker ← P_t(√γ·ε_ker + √(1−γ)·η)` with fresh `η ~ N(0, I)` per sample.
    pub fn step<M: LinearMap>(&mut self, j: &M, cg: &CgOptions) -> Result<Vec<CgReport>> {
        let keep = self.gamma.sqrt();
        let fresh = (1.0 - self.gamma).sqrt();
        let dim = self.dim();
        for e in &mut self.eps_ker {
            if fresh > 0.0 {
                let eta = standard_normal(&mut self.rng, dim);
                for (ei, ni) in e.iter_mut().zip(eta) {
                    *ei = keep * *ei + fresh * ni;
                }
            }
        }
        self.project_all(j, cg)
    }

    /// The pre-projection mix `√γ·ε + √(1−γ)·η` that [`step`](Self::step)
    /// would form for `eps`, drawing `η` from this state's stream.
    pub fn mix(&mut self, eps: &[f64]) -> Vec<f64> {
        let keep = self.gamma.sqrt();
        let fresh = (1.0 - self.gamma).sqrt();
        let eta = standard_normal(&mut self.rng, eps.len());
        eps.iter().zip(eta).map(|(e, n)| keep * e + fresh * n).collect()
    }

    /// Sets kernel noise directly; used with exact dense projectors.
    pub fn set_eps_ker(&mut self, s: usize, eps_ker: Vec<f64>) {
        assert_eq!(eps_ker.len(), self.dim());
        self.eps_ker[s] = eps_ker;
    }
}

/// Jacobian blocks of every batch at `θ̂`.
pub fn jacobian_blocks(
    spec: &ModelSpec,
    theta_hat: &[f64],
    batches: &[Batch],
    kind: JacobianKind,
) -> Result<Vec<DenseRows>> {
    batches
        .iter()
        .map(|b| jacobian_rows(spec, theta_hat, b, kind))
        .collect()
}

/// Epoch pre-pass: draws `ε^(s,0)` for each sample and projects it onto the
/// kernel of every batch in turn, `passes` times over the whole dataset.
#[allow(clippy::too_many_arguments)]
pub fn init_kernel_noise(
    posterior: &Posterior,
    batches: &[Batch],
    spec: &ModelSpec,
    kind: JacobianKind,
    cg: &CgOptions,
    samples: usize,
    passes: usize,
    gamma: f64,
    rng: ChaCha8Rng,
) -> Result<ProjectionState> {
    let blocks = jacobian_blocks(spec, &posterior.theta_hat, batches, kind)?;
    let mut state = ProjectionState::draw(samples, posterior.dim(), gamma, rng)?;
    for _ in 0..passes {
        for j in &blocks {
            state.project_all(j, cg)?;
        }
    }
    Ok(state)
}

/// Advances every sample's kernel noise against the batch Jacobian `j`.
pub fn step_kernel_noise<M: LinearMap>(
    state: &mut ProjectionState,
    j: &M,
    cg: &CgOptions,
) -> Result<Vec<CgReport>> {
    state.step(j, cg)
}
