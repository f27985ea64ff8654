//! Projects Gaussian noise onto the kernel of a small network's Jacobian and
//! checks that kernel-direction samples leave the training predictions alone
//! under the linearized predictive.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use viking::linalg::{dense_kernel_projector, dense_rank, kernel_project, vector, CgOptions, LinearMap};
use viking::net::{jacobian_rows, linearized_predict, Activation, Batch, JacobianKind, LossKind, ModelSpec, Targets};

fn main() -> viking::Result<()> {
    let spec = ModelSpec::mlp(&[2, 8, 1], Activation::Tanh, LossKind::GaussianRegression { noise_std: 0.1 })?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let x = DMatrix::from_fn(12, 2, |_, _| StandardNormal.sample(&mut rng));
    let y = DMatrix::from_fn(12, 1, |_, _| StandardNormal.sample(&mut rng));
    let batch = Batch::new(x, Targets::Values(y))?;
    let theta = spec.init_params(1);

    let j = jacobian_rows(&spec, &theta, &batch, JacobianKind::ModelOutput)?;
    let eps: Vec<f64> = (0..spec.num_params()).map(|_| StandardNormal.sample(&mut rng)).collect();
    let (ker, report) = kernel_project(&j, &eps, &CgOptions::with_budget(50, 1e-12))?;
    let im = vector::sub(&eps, &ker);

    let oracle = dense_kernel_projector(&j) * nalgebra::DVector::from_column_slice(&eps);
    let deviation = ker.iter().zip(oracle.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("D = {}, rows = {}, kernel dimension = {}", spec.num_params(), j.rows(), spec.num_params() - dense_rank(&j));
    println!("CG: {} iterations, relative residual {:.2e}", report.iterations, report.relative_residual);
    println!("‖J ε_ker‖ / ‖J ε‖      = {:.2e}", vector::norm(&j.apply(&ker)) / vector::norm(&j.apply(&eps)));
    println!("⟨ε_ker, ε_im⟩ / ‖ε‖²   = {:.2e}", vector::dot(&ker, &im) / vector::dot(&eps, &eps));
    println!("max |ε_ker − SVD oracle| = {deviation:.2e}");

    let shift = |dir: &[f64]| -> viking::Result<f64> {
        let moved: Vec<f64> = theta.iter().zip(dir).map(|(t, d)| t + 0.5 * d).collect();
        let base = linearized_predict(&spec, &theta, &theta, &batch.inputs)?;
        let out = linearized_predict(&spec, &theta, &moved, &batch.inputs)?;
        Ok((out - base).abs().max())
    };
    println!("largest change in training predictions: kernel step {:.2e}, image step {:.2e}", shift(&ker)?, shift(&im)?);
    Ok(())
}
