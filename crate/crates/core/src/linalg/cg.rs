use serde::{Deserialize, Serialize};

use super::operator::LinearMap;
use super::vector::{axpy, dot, norm};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CgOptions {
    pub max_iter: usize,
    /// Relative residual `‖Ax − b‖ / ‖b‖` at which iteration stops.
    pub tol: f64,
    /// Re-orthogonalize each new residual against all previous ones.
    pub reorthogonalize: bool,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            max_iter: 10,
            tol: 1e-6,
            reorthogonalize: true,
        }
    }
}

impl CgOptions {
    pub fn with_budget(max_iter: usize, tol: f64) -> Self {
        Self {
            max_iter,
            tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CgReport {
    pub iterations: usize,
    /// True relative residual `‖Ax − b‖ / ‖b‖` of the returned solution.
    pub relative_residual: f64,
    pub converged: bool,
}

impl CgReport {
    pub(crate) fn trivial() -> Self {
        Self {
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        }
    }
}

/// A search direction whose Rayleigh quotient `pᵀAp / pᵀp` falls below this
/// fraction of the largest one seen so far is treated as numerically null:
/// below it, rounding in `A p` dominates and further steps only amplify noise.
pub const NULL_CURVATURE: f64 = 1e-14;

/// Solves `A x = b` for a symmetric positive semi-definite `A` by conjugate
/// gradients, optionally with full re-orthogonalization of the residuals.
///
/// Singular systems are fine as long as `b` lies in the range of `A`. A
/// non-positive or numerically null curvature `pᵀAp` (see
/// [`NULL_CURVATURE`]) ends the iteration early.
pub fn cg_solve<M: LinearMap>(gram: &M, b: &[f64], opts: &CgOptions) -> Result<(Vec<f64>, CgReport)> {
    let n = b.len();
    if gram.rows() != n || gram.cols() != n {
        return Err(Error::Shape(format!(
            "{}x{} operator with right-hand side of length {n}",
            gram.rows(),
            gram.cols()
        )));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::CgBreakdown { iteration: 0 });
    }
    #[cfg(debug_assertions)]
    debug_check_symmetric(gram);

    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok((vec![0.0; n], CgReport::trivial()));
    }

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    if opts.reorthogonalize {
        basis.push(r.iter().map(|v| v / rr.sqrt()).collect());
    }

    let mut iterations = 0;
    let mut top_quotient = 0.0f64;
    for k in 1..=opts.max_iter {
        let ap = gram.apply(&p);
        let curvature = dot(&p, &ap);
        if !curvature.is_finite() {
            return Err(Error::CgBreakdown { iteration: k });
        }
        let quotient = curvature / dot(&p, &p);
        if curvature <= 0.0 || quotient <= NULL_CURVATURE * top_quotient {
            break;
        }
        top_quotient = top_quotient.max(quotient);
        let alpha = rr / curvature;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        iterations = k;

        if opts.reorthogonalize {
            // Two Gram-Schmidt sweeps keep the basis orthogonal to working precision.
            for _ in 0..2 {
                for q in &basis {
                    let c = dot(q, &r);
                    axpy(-c, q, &mut r);
                }
            }
        }

        let rr_new = dot(&r, &r);
        if !rr_new.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::CgBreakdown { iteration: k });
        }
        if rr_new.sqrt() <= opts.tol * b_norm {
            break;
        }
        if opts.reorthogonalize {
            let r_norm = rr_new.sqrt();
            basis.push(r.iter().map(|v| v / r_norm).collect());
        }
        let beta = rr_new / rr;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
        rr = rr_new;
    }

    let ax = gram.apply(&x);
    let residual = ax
        .iter()
        .zip(b)
        .map(|(a, bi)| (a - bi) * (a - bi))
        .sum::<f64>()
        .sqrt()
        / b_norm;
    if !residual.is_finite() {
        return Err(Error::CgBreakdown { iteration: iterations });
    }
    Ok((
        x,
        CgReport {
            iterations,
            relative_residual: residual,
            converged: residual <= opts.tol,
        },
    ))
}

#[cfg(debug_assertions)]
fn debug_check_symmetric<M: LinearMap>(gram: &M) {
    let n = gram.rows();
    let u: Vec<f64> = (0..n).map(|i| ((i as f64 + 1.0) * 0.754_877_666).sin()).collect();
    let v: Vec<f64> = (0..n).map(|i| ((i as f64 + 1.0) * 0.569_840_290).cos()).collect();
    let lhs = dot(&u, &gram.apply(&v));
    let rhs = dot(&gram.apply(&u), &v);
    let scale = lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE);
    debug_assert!(
        (lhs - rhs).abs() <= 1e-8 * scale || !lhs.is_finite(),
        "CG operator is not symmetric: {lhs} vs {rhs}"
    );
}

#[cfg(test)]
mod tests {
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    use super::*;
    use crate::linalg::DenseRows;

    fn dense(m: &DMatrix<f64>) -> DenseRows {
        DenseRows::from_matrix(m)
    }

    #[test]
    fn identity_system_one_iteration() {
        let a = dense(&DMatrix::identity(3, 3));
        let (x, rep) = cg_solve(&a, &[1.0, 2.0, 3.0], &CgOptions::default()).unwrap();
        assert_eq!(x, vec![1.0, 2.0, 3.0]);
        assert_eq!(rep.iterations, 1);
        assert!(rep.converged);
    }

    #[test]
    fn diagonal_system() {
        let a = dense(&DMatrix::from_diagonal(&nalgebra::dvector![2.0, 4.0]));
        let (x, rep) = cg_solve(&a, &[2.0, 4.0], &CgOptions::default()).unwrap();
        // dense oracle: diag(2,4)⁻¹ (2,4) = (1,1)
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
        assert!(rep.converged);
    }

    #[test]
    fn zero_rhs_short_circuits() {
        let a = dense(&DMatrix::identity(4, 4));
        let (x, rep) = cg_solve(&a, &[0.0; 4], &CgOptions::default()).unwrap();
        assert_eq!(x, vec![0.0; 4]);
        assert_eq!(rep.iterations, 0);
    }

    #[test]
    fn non_finite_rhs_is_breakdown() {
        let a = dense(&DMatrix::identity(2, 2));
        let err = cg_solve(&a, &[f64::NAN, 1.0], &CgOptions::default()).unwrap_err();
        assert!(matches!(err, Error::CgBreakdown { iteration: 0 }));
    }

    #[test]
    fn random_spd_matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let g = DMatrix::<f64>::from_fn(10, 10, |_, _| StandardNormal.sample(&mut rng));
            let a = &g * g.transpose() + DMatrix::identity(10, 10) * 10.0;
            let b: Vec<f64> = (0..10).map(|_| StandardNormal.sample(&mut rng)).collect();
            let exact = a.clone().lu().solve(&nalgebra::DVector::from_column_slice(&b)).unwrap();
            let opts = CgOptions::with_budget(10, 1e-14);
            let (x, rep) = cg_solve(&dense(&a), &b, &opts).unwrap();
            assert!(rep.iterations <= 10);
            let err = x.iter().zip(exact.iter()).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
            assert!(err <= 1e-8 * exact.norm(), "relative error {}", err / exact.norm());
        }
    }

    #[test]
    fn budget_is_respected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = DMatrix::<f64>::from_fn(30, 30, |_, _| StandardNormal.sample(&mut rng));
        let a = &g * g.transpose();
        let b = vec![1.0; 30];
        let (_, rep) = cg_solve(&dense(&a), &b, &CgOptions::with_budget(4, 1e-14)).unwrap();
        assert_eq!(rep.iterations, 4);
        assert!(!rep.converged);
        assert!(rep.relative_residual >= 0.0);
    }

    #[test]
    fn consistent_singular_system_converges() {
        // rank-2 PSD matrix with b in its range
        let v = DMatrix::<f64>::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 0.0, 1.0]);
        let a = &v * v.transpose();
        let b: Vec<f64> = (&a * nalgebra::dvector![1.0, -2.0, 0.5]).iter().copied().collect();
        let (x, rep) = cg_solve(&dense(&a), &b, &CgOptions::with_budget(10, 1e-12)).unwrap();
        assert!(rep.converged, "{rep:?}");
        let ax = dense(&a).apply(&x);
        for (p, q) in ax.iter().zip(&b) {
            assert!((p - q).abs() < 1e-10);
        }
    }
}
