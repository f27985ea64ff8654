//! Variational inference for overparametrized networks with a Gaussian
//! posterior split along the kernel and image of the empirical Fisher–Rao
//! metric.

pub mod cli;
pub mod data;
pub mod error;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod net;
pub mod train;
pub mod viking;

pub use error::{Error, Result};
