use nalgebra::DMatrix;

use super::cg::{cg_solve, CgOptions, CgReport};
use super::operator::{DenseRows, Gram, LinearMap};
use super::vector::norm;
use crate::error::{Error, Result};

/// Singular values below this fraction of the largest count as zero.
pub const SVD_RANK_CUTOFF: f64 = 1e-10;

/// Euclidean projection of `eps` onto `ker(J)`.
///
/// Solves `JJᵀλ = Jε` by conjugate gradients and returns `ε − Jᵀλ`. The CG
/// residual equals `J·ε_ker`, so the report's relative residual is
/// `‖J ε_ker‖ / ‖J ε‖`.
pub fn kernel_project<M: LinearMap>(j: &M, eps: &[f64], opts: &CgOptions) -> Result<(Vec<f64>, CgReport)> {
    if eps.len() != j.cols() {
        return Err(Error::Shape(format!(
            "operator acts on ℝ^{}, vector has length {}",
            j.cols(),
            eps.len()
        )));
    }
    let rhs = j.apply(eps);
    if norm(&rhs) == 0.0 {
        return Ok((eps.to_vec(), CgReport::trivial()));
    }
    let (lambda, report) = cg_solve(&Gram(j), &rhs, opts)?;
    let correction = j.apply_transpose(&lambda);
    let projected = eps.iter().zip(&correction).map(|(e, c)| e - c).collect();
    Ok((projected, report))
}

/// Orthonormal basis (as columns) of the row space of `j`, from its SVD.
fn row_space_basis(j: &DenseRows) -> DMatrix<f64> {
    let d = j.cols();
    if j.rows() == 0 || j.is_zero() {
        return DMatrix::zeros(d, 0);
    }
    let svd = j.to_matrix().svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let s_max = svd.singular_values.max();
    let keep: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > SVD_RANK_CUTOFF * s_max)
        .map(|(i, _)| i)
        .collect();
    DMatrix::from_fn(d, keep.len(), |r, c| v_t[(keep[c], r)])
}

/// Numerical rank of `j` under [`SVD_RANK_CUTOFF`].
pub fn dense_rank(j: &DenseRows) -> usize {
    row_space_basis(j).ncols()
}

/// Dense `D × D` orthogonal projector onto `ker(J)` via the SVD. Intended
/// as a reference for small problems.
pub fn dense_kernel_projector(j: &DenseRows) -> DMatrix<f64> {
    let d = j.cols();
    let v = row_space_basis(j);
    let mut p = DMatrix::identity(d, d) - &v * v.transpose();
    // exact symmetry
    let pt = p.transpose();
    p = (p + pt) * 0.5;
    p
}
