//! Mini-batch alternating projections: with γ = 1 repeated passes over the
//! batch kernels converge to the full-data kernel projection; with γ < 1
//! fresh noise is mixed in at every step.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use viking::linalg::{dense_kernel_projector, CgOptions, DenseRows};
use viking::net::{Activation, Batch, JacobianKind, LossKind, ModelSpec, Targets};
use viking::viking::{jacobian_blocks, ProjectionState};

fn main() -> viking::Result<()> {
    let spec = ModelSpec::mlp(&[30, 5, 1], Activation::Tanh, LossKind::GaussianRegression { noise_std: 0.5 })?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = DMatrix::from_fn(20, 30, |_, _| StandardNormal.sample(&mut rng));
    let y = DMatrix::from_fn(20, 1, |_, _| StandardNormal.sample(&mut rng));
    let data = Batch::new(x, Targets::Values(y))?;
    let theta = spec.init_params(0);
    let batches: Vec<Batch> = (0..4).map(|b| data.select(&(5 * b..5 * b + 5).collect::<Vec<_>>())).collect();
    let blocks = jacobian_blocks(&spec, &theta, &batches, JacobianKind::ModelOutput)?;
    let full = dense_kernel_projector(&DenseRows::vstack(&blocks));
    let cg = CgOptions::with_budget(20, 1e-12);

    for gamma in [1.0, 0.5] {
        let mut state = ProjectionState::from_seed(1, spec.num_params(), gamma, 11)?;
        let target = &full * DVector::from_column_slice(state.eps0(0));
        println!("γ = {gamma}");
        for pass in 1..=40 {
            for j in &blocks {
                state.step(j, &cg)?;
            }
            if pass % 10 == 0 {
                let err = state.eps_ker(0).iter().zip(target.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                let in_kernel = (&full * DVector::from_column_slice(state.eps_ker(0)) - DVector::from_column_slice(state.eps_ker(0))).norm();
                println!("  pass {pass:2}: distance to P ε⁰ {err:.2e}, distance from ker(J) {in_kernel:.2e}");
            }
        }
    }
    Ok(())
}
