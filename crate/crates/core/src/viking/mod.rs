//! The kernel/image Gaussian posterior: sampling through stochastic
//! alternating projections, Hutchinson rank estimates, the closed-form KL
//! and the β-ELBO.

mod checkpoint;
mod elbo;
mod kl;
mod noise;
mod posterior;
mod sample;

pub use checkpoint::{Checkpoint, MAGIC, VERSION};
pub use elbo::{elbo_estimate, elbo_gradient, ElboContext, ElboEstimate};
pub use kl::{kl, kl_gradient, kl_untied, kl_untied_grad_log_sigma_ker, KlGradient};
pub use noise::{init_kernel_noise, jacobian_blocks, step_kernel_noise, ProjectionState};
pub use posterior::{Posterior, DEFAULT_LOG_ALPHA, DEFAULT_LOG_SIGMA_IM};
pub use sample::{compose, draw_all, draw_sample, estimate_rank, PosteriorSample, RankEstimate};
