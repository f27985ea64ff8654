use serde::{Deserialize, Serialize};

use crate::net::ParamVector;

/// Initial `log α`, which also fixes `σ_ker = exp(−½ log α)`.
pub const DEFAULT_LOG_ALPHA: f64 = 4.0;
/// Initial `log σ_im`; small so image-space noise starts out harmless.
pub const DEFAULT_LOG_SIGMA_IM: f64 = -2.0;

/// Variational posterior `N(θ̂, σ_ker² UUᵀ + σ_im² (I − UUᵀ))` with prior
/// `N(0, α⁻¹ I)`.
///
/// `σ_ker² = 1/α` holds by construction: the kernel scale is derived from
/// `log_alpha` and never stored separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Posterior {
    pub theta_hat: ParamVector,
    #[serde(with = "crate::io::extended_f64")]
    pub log_alpha: f64,
    #[serde(with = "crate::io::extended_f64")]
    pub log_sigma_im: f64,
}

impl Posterior {
    pub fn new(theta_hat: ParamVector, log_alpha: f64, log_sigma_im: f64) -> Self {
        Self {
            theta_hat,
            log_alpha,
            log_sigma_im,
        }
    }

    pub fn with_defaults(theta_hat: ParamVector) -> Self {
        Self::new(theta_hat, DEFAULT_LOG_ALPHA, DEFAULT_LOG_SIGMA_IM)
    }

    /// Point mass at `θ̂`: both scales are exactly zero.
    pub fn point(theta_hat: ParamVector) -> Self {
        Self::new(theta_hat, f64::INFINITY, f64::NEG_INFINITY)
    }

    pub fn dim(&self) -> usize {
        self.theta_hat.len()
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    pub fn sigma_ker(&self) -> f64 {
        (-0.5 * self.log_alpha).exp()
    }

    pub fn sigma_im(&self) -> f64 {
        self.log_sigma_im.exp()
    }

    pub fn is_point_mass(&self) -> bool {
        self.sigma_ker() == 0.0 && self.sigma_im() == 0.0
    }
}
