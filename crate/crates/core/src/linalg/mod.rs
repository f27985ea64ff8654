//! Matrix-free operators, re-orthogonalized conjugate gradients and kernel
//! projections.

mod cg;
mod operator;
mod projection;
pub mod vector;

pub use cg::{cg_solve, CgOptions, CgReport, NULL_CURVATURE};
pub use operator::{adjoint_defect, DenseRows, Gram, LinearMap};
pub use projection::{dense_kernel_projector, dense_rank, kernel_project, SVD_RANK_CUTOFF};
