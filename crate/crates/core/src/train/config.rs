use serde::{Deserialize, Serialize};

use crate::linalg::CgOptions;
use crate::net::{JacobianKind, Predictive};
use crate::viking::{DEFAULT_LOG_ALPHA, DEFAULT_LOG_SIGMA_IM};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// KL weight of the β-ELBO. Zero switches the KL term off.
    pub beta: f64,
    pub gamma: f64,
    /// Monte Carlo samples per training step.
    pub samples: usize,
    pub eval_samples: usize,
    pub batch_size: usize,
    pub warmup_epochs: usize,
    /// σ-only epochs between warmup and full ELBO training.
    pub sigma_tune_epochs: usize,
    pub elbo_epochs: usize,
    pub warmup_lr: f64,
    pub elbo_lr: f64,
    pub cg_iters: usize,
    pub cg_tol: f64,
    /// Global gradient-norm threshold.
    pub clip: Option<f64>,
    pub seed: u64,
    pub init_log_alpha: f64,
    pub init_log_sigma_im: f64,
    /// Passes over all batches in the per-epoch projection pre-pass.
    pub projection_passes: usize,
    /// Weight kept from the previous kernel-dimension estimate.
    pub rank_smoothing: f64,
    /// When false, `log α` and `log σ_im` stay at their initial values.
    pub learn_sigmas: bool,
    pub jacobian: JacobianKind,
    pub predictive: Predictive,
    pub checkpoint_every: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            beta: 1e-4,
            gamma: 0.5,
            samples: 1,
            eval_samples: 20,
            batch_size: 32,
            warmup_epochs: 20,
            sigma_tune_epochs: 5,
            elbo_epochs: 50,
            warmup_lr: 1e-3,
            elbo_lr: 1e-4,
            cg_iters: 10,
            cg_tol: 1e-6,
            clip: None,
            seed: 0,
            init_log_alpha: DEFAULT_LOG_ALPHA,
            init_log_sigma_im: DEFAULT_LOG_SIGMA_IM,
            projection_passes: 1,
            rank_smoothing: 0.9,
            learn_sigmas: true,
            jacobian: JacobianKind::Loss,
            predictive: Predictive::Direct,
            checkpoint_every: None,
        }
    }
}

impl TrainConfig {
    pub fn cg(&self) -> CgOptions {
        CgOptions::with_budget(self.cg_iters, self.cg_tol)
    }

    /// Every violated constraint, one message each.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let mut need = |ok: bool, msg: &str| {
            if !ok {
                v.push(format!("train.{msg}"));
            }
        };
        need(self.beta >= 0.0 && self.beta.is_finite(), "beta must be finite and >= 0");
        need((0.0..=1.0).contains(&self.gamma), "gamma must lie in [0, 1]");
        need(self.samples >= 1, "samples must be >= 1");
        need(self.eval_samples >= 1, "eval_samples must be >= 1");
        need(self.batch_size >= 1, "batch_size must be >= 1");
        need(self.warmup_lr > 0.0 && self.warmup_lr.is_finite(), "warmup_lr must be > 0");
        need(self.elbo_lr > 0.0 && self.elbo_lr.is_finite(), "elbo_lr must be > 0");
        need(self.cg_iters >= 1, "cg_iters must be >= 1");
        need(self.cg_tol > 0.0, "cg_tol must be > 0");
        need(self.clip.is_none_or(|c| c > 0.0), "clip must be > 0 when set");
        need(!self.init_log_alpha.is_nan(), "init_log_alpha must not be NaN");
        need(!self.init_log_sigma_im.is_nan(), "init_log_sigma_im must not be NaN");
        need(self.projection_passes >= 1, "projection_passes must be >= 1");
        need((0.0..1.0).contains(&self.rank_smoothing), "rank_smoothing must lie in [0, 1)");
        need(self.checkpoint_every.is_none_or(|k| k >= 1), "checkpoint_every must be >= 1 when set");
        v
    }
}
