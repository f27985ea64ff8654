//! Hutchinson estimate of the kernel dimension from projected noise,
//! compared with the SVD rank.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use viking::linalg::{dense_rank, CgOptions, DenseRows};
use viking::viking::{estimate_rank, ProjectionState};

fn main() -> viking::Result<()> {
    let d = 50;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for rows in [0, 10, 25, 40, 50] {
        let j = DenseRows::from_matrix(&DMatrix::from_fn(rows, d, |_, _| StandardNormal.sample(&mut rng)));
        let exact = d - dense_rank(&j);
        for samples in [10, 100, 2000] {
            let mut state = ProjectionState::from_seed(samples, d, 1.0, rows as u64)?;
            state.project_all(&j, &CgOptions::with_budget(60, 1e-12))?;
            let est = estimate_rank(state.pairs());
            println!("kernel dim {exact:2}, S = {samples:4}: R̂ = {:6.2}", est.r_hat);
        }
    }
    Ok(())
}
