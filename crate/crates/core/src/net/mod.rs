//! Dense feed-forward networks with exact reverse-mode gradients.
//!
//! Everything here works on flat [`ParamVector`]s so the linear algebra
//! downstream only ever sees vectors in `ℝ^D`.

mod model;
pub mod tape;

use serde::{Deserialize, Serialize};

pub use model::{Activation, Batch, LossKind, ModelSpec, ParamVector, Targets};
use tape::{Gradients, Mat, Tape, Var};

use crate::error::{Error, Result};
use crate::linalg::DenseRows;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Which per-datum rows span the image space used for projections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JacobianKind {
    /// One row per datum: the gradient of its log-likelihood.
    #[default]
    Loss,
    /// One row per datum and output: the gradient of that network output.
    ModelOutput,
}

/// How predictions are formed from a parameter sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Predictive {
    /// `f_θ(x)`
    #[default]
    Direct,
    /// `f_θ̂(x) + J_θ̂(x)(θ − θ̂)`
    Linearized,
}

struct Graph {
    tape: Tape,
    layers: Vec<(Var, Var)>,
    output: Var,
}

fn build(spec: &ModelSpec, params: &[f64], inputs: &Mat) -> Result<Graph> {
    if inputs.ncols() != spec.input_dim() {
        return Err(Error::Shape(format!(
            "model takes {} inputs, got {}",
            spec.input_dim(),
            inputs.ncols()
        )));
    }
    let mut tape = Tape::new();
    let layers: Vec<(Var, Var)> = spec
        .unpack(params)?
        .into_iter()
        .map(|(w, b)| (tape.leaf(w), tape.leaf(b)))
        .collect();
    let mut h = tape.leaf(inputs.clone());
    for (l, &(w, b)) in layers.iter().enumerate() {
        let z = tape.matmul_t(h, w);
        let z = tape.add_row(z, b);
        h = match spec.activation(l) {
            Activation::Tanh => tape.tanh(z),
            Activation::Relu => tape.relu(z),
            Activation::Elu => tape.elu(z),
            Activation::Identity => z,
        };
    }
    Ok(Graph {
        tape,
        layers,
        output: h,
    })
}

/// Tape for `f_θ̂(x) + J_θ̂(x)·δ` with both `θ̂` and `δ` as leaves. The tangent
/// is carried through the network with ordinary tape ops, so the reverse
/// sweep differentiates the linearization point as well.
struct LinearizedGraph {
    graph: Graph,
    tangents: Vec<(Var, Var)>,
    tangent_output: Var,
}

fn build_linearized(
    spec: &ModelSpec,
    theta_hat: &[f64],
    delta: &[f64],
    inputs: &Mat,
) -> Result<LinearizedGraph> {
    if inputs.ncols() != spec.input_dim() {
        return Err(Error::Shape(format!(
            "model takes {} inputs, got {}",
            spec.input_dim(),
            inputs.ncols()
        )));
    }
    let mut tape = Tape::new();
    let layers: Vec<(Var, Var)> = spec
        .unpack(theta_hat)?
        .into_iter()
        .map(|(w, b)| (tape.leaf(w), tape.leaf(b)))
        .collect();
    let tangents: Vec<(Var, Var)> = spec
        .unpack(delta)?
        .into_iter()
        .map(|(w, b)| (tape.leaf(w), tape.leaf(b)))
        .collect();
    let mut h = tape.leaf(inputs.clone());
    let mut dh: Option<Var> = None;
    for (l, (&(w, b), &(dw, db))) in layers.iter().zip(&tangents).enumerate() {
        let z = tape.matmul_t(h, w);
        let z = tape.add_row(z, b);
        // dz = dh·Wᵀ + h·dWᵀ + db
        let mut dz = tape.matmul_t(h, dw);
        dz = tape.add_row(dz, db);
        if let Some(dh) = dh {
            let carried = tape.matmul_t(dh, w);
            dz = tape.add(dz, carried);
        }
        let (a, da) = match spec.activation(l) {
            Activation::Tanh => {
                let a = tape.tanh(z);
                let a2 = tape.square(a);
                let slope = tape.affine(a2, -1.0, 1.0);
                (a, tape.mul(slope, dz))
            }
            Activation::Relu => {
                let a = tape.relu(z);
                let slope = tape.step(z);
                (a, tape.mul(slope, dz))
            }
            Activation::Elu => {
                let a = tape.elu(z);
                let slope = tape.elu_slope(z);
                (a, tape.mul(slope, dz))
            }
            Activation::Identity => (z, dz),
        };
        h = a;
        dh = Some(da);
    }
    let tangent_output = dh.expect("at least one layer");
    let output = tape.add(h, tangent_output);
    Ok(LinearizedGraph {
        graph: Graph {
            tape,
            layers,
            output,
        },
        tangents,
        tangent_output,
    })
}

/// Per-datum log-likelihood column (`n × 1`).
fn log_lik(tape: &mut Tape, spec: &ModelSpec, output: Var, targets: &Targets) -> Var {
    match (spec.loss, targets) {
        (LossKind::Categorical, Targets::Labels(labels)) => {
            let lsm = tape.log_softmax(output);
            tape.pick(lsm, labels.clone())
        }
        (LossKind::GaussianRegression { noise_std }, Targets::Values(y)) => {
            let y = tape.leaf(y.clone());
            let resid = tape.sub(output, y);
            let sq = tape.square(resid);
            let rss = tape.row_sum(sq);
            let k = spec.output_dim() as f64;
            tape.affine(
                rss,
                -0.5 / (noise_std * noise_std),
                -k * (noise_std.ln() + HALF_LN_2PI),
            )
        }
        _ => unreachable!("batch checked against the model"),
    }
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFiniteLoss {
            index,
            value: values[index],
        }),
        None => Ok(()),
    }
}

fn flatten(spec: &ModelSpec, grads: &Gradients, layers: &[(Var, Var)]) -> Vec<f64> {
    let mut out = Vec::with_capacity(spec.num_params());
    for (&(w, b), (rows, cols)) in layers.iter().zip(spec.layer_shapes()) {
        match grads.get(w) {
            Some(g) => {
                for r in 0..rows {
                    out.extend(g.row(r).iter());
                }
            }
            None => out.extend(std::iter::repeat_n(0.0, rows * cols)),
        }
        match grads.get(b) {
            Some(g) => out.extend(g.iter()),
            None => out.extend(std::iter::repeat_n(0.0, rows)),
        }
    }
    out
}

/// Network outputs, one row per input row.
pub fn forward(spec: &ModelSpec, params: &[f64], inputs: &Mat) -> Result<Mat> {
    let g = build(spec, params, inputs)?;
    Ok(g.tape.value(g.output).clone())
}

/// Negative log-likelihood of each datum.
pub fn per_datum_losses(spec: &ModelSpec, params: &[f64], batch: &Batch) -> Result<Vec<f64>> {
    batch.check(spec)?;
    let mut g = build(spec, params, &batch.inputs)?;
    let ll = log_lik(&mut g.tape, spec, g.output, &batch.targets);
    let losses: Vec<f64> = g.tape.value(ll).iter().map(|v| -v).collect();
    check_finite(&losses)?;
    Ok(losses)
}

/// Mean negative log-likelihood over the batch and its gradient.
pub fn mean_nll_grad(spec: &ModelSpec, params: &[f64], batch: &Batch) -> Result<(f64, Vec<f64>)> {
    batch.check(spec)?;
    let mut g = build(spec, params, &batch.inputs)?;
    let ll = log_lik(&mut g.tape, spec, g.output, &batch.targets);
    check_finite(g.tape.value(ll).as_slice())?;
    let total = g.tape.sum(ll);
    let mean_nll = g.tape.affine(total, -1.0 / batch.len() as f64, 0.0);
    let grads = g.tape.backward(mean_nll);
    Ok((g.tape.scalar(mean_nll), flatten(spec, &grads, &g.layers)))
}

/// Stack of per-datum log-likelihood gradients, `B × D`.
pub fn per_datum_grads(spec: &ModelSpec, params: &[f64], batch: &Batch) -> Result<DenseRows> {
    batch.check(spec)?;
    let d = spec.num_params();
    let mut rows = DenseRows::zeros(batch.len(), d);
    for i in 0..batch.len() {
        let datum = batch.select(&[i]);
        let mut g = build(spec, params, &datum.inputs)?;
        let ll = log_lik(&mut g.tape, spec, g.output, &datum.targets);
        let v = g.tape.scalar(ll);
        if !v.is_finite() {
            return Err(Error::NonFiniteLoss { index: i, value: -v });
        }
        let grads = g.tape.backward(ll);
        rows.row_mut(i).copy_from_slice(&flatten(spec, &grads, &g.layers));
    }
    Ok(rows)
}

/// Jacobian of the network outputs, one row per `(datum, output)` pair in
/// datum-major order.
pub fn output_jacobian(spec: &ModelSpec, params: &[f64], inputs: &Mat) -> Result<DenseRows> {
    let k = spec.output_dim();
    let mut rows = DenseRows::zeros(inputs.nrows() * k, spec.num_params());
    for i in 0..inputs.nrows() {
        let x = inputs.rows(i, 1).into_owned();
        let g = build(spec, params, &x)?;
        for j in 0..k {
            let mut seed = Mat::zeros(1, k);
            seed[(0, j)] = 1.0;
            let grads = g.tape.backward_with(g.output, seed);
            rows.row_mut(i * k + j)
                .copy_from_slice(&flatten(spec, &grads, &g.layers));
        }
    }
    Ok(rows)
}

/// The rows whose kernel defines the posterior's kernel space for `batch`.
pub fn jacobian_rows(
    spec: &ModelSpec,
    params: &[f64],
    batch: &Batch,
    kind: JacobianKind,
) -> Result<DenseRows> {
    match kind {
        JacobianKind::Loss => per_datum_grads(spec, params, batch),
        JacobianKind::ModelOutput => {
            batch.check(spec)?;
            output_jacobian(spec, params, &batch.inputs)
        }
    }
}

/// `J_θ(x)·v` for every input row, computed by tangent propagation.
pub fn output_jvp(spec: &ModelSpec, params: &[f64], direction: &[f64], inputs: &Mat) -> Result<Mat> {
    let lg = build_linearized(spec, params, direction, inputs)?;
    Ok(lg.graph.tape.value(lg.tangent_output).clone())
}

/// First-order Taylor prediction of `f_{θ_sample}` around `θ̂`.
pub fn linearized_predict(
    spec: &ModelSpec,
    theta_hat: &[f64],
    theta_sample: &[f64],
    inputs: &Mat,
) -> Result<Mat> {
    spec.check_params(theta_sample)?;
    let delta: Vec<f64> = theta_sample
        .iter()
        .zip(theta_hat)
        .map(|(s, h)| s - h)
        .collect();
    let lg = build_linearized(spec, theta_hat, &delta, inputs)?;
    Ok(lg.graph.tape.value(lg.graph.output).clone())
}

/// Predictions for one parameter sample under the chosen predictive.
pub fn predict(
    spec: &ModelSpec,
    theta_hat: &[f64],
    theta_sample: &[f64],
    inputs: &Mat,
    predictive: Predictive,
) -> Result<Mat> {
    match predictive {
        Predictive::Direct => forward(spec, theta_sample, inputs),
        Predictive::Linearized => linearized_predict(spec, theta_hat, theta_sample, inputs),
    }
}

/// Per-datum negative log-likelihood of a parameter sample under the chosen
/// predictive.
pub fn predictive_losses(
    spec: &ModelSpec,
    theta_hat: &[f64],
    theta_sample: &[f64],
    batch: &Batch,
    predictive: Predictive,
) -> Result<Vec<f64>> {
    match predictive {
        Predictive::Direct => per_datum_losses(spec, theta_sample, batch),
        Predictive::Linearized => {
            batch.check(spec)?;
            spec.check_params(theta_sample)?;
            let delta: Vec<f64> = theta_sample
                .iter()
                .zip(theta_hat)
                .map(|(s, h)| s - h)
                .collect();
            let mut lg = build_linearized(spec, theta_hat, &delta, &batch.inputs)?;
            let out = lg.graph.output;
            let ll = log_lik(&mut lg.graph.tape, spec, out, &batch.targets);
            let losses: Vec<f64> = lg.graph.tape.value(ll).iter().map(|v| -v).collect();
            check_finite(&losses)?;
            Ok(losses)
        }
    }
}

/// Mean NLL of a posterior sample on a batch, with gradients with respect to
/// the mean `θ̂` and the displacement `θ_sample − θ̂` (the displacement held
/// independent of `θ̂`).
#[derive(Debug, Clone)]
pub struct SampleGrad {
    pub mean_nll: f64,
    pub d_theta_hat: Vec<f64>,
    pub d_displacement: Vec<f64>,
}

pub fn sample_nll_grad(
    spec: &ModelSpec,
    theta_hat: &[f64],
    theta_sample: &[f64],
    batch: &Batch,
    predictive: Predictive,
) -> Result<SampleGrad> {
    match predictive {
        Predictive::Direct => {
            let (mean_nll, g) = mean_nll_grad(spec, theta_sample, batch)?;
            Ok(SampleGrad {
                mean_nll,
                d_theta_hat: g.clone(),
                d_displacement: g,
            })
        }
        Predictive::Linearized => {
            batch.check(spec)?;
            spec.check_params(theta_sample)?;
            let delta: Vec<f64> = theta_sample
                .iter()
                .zip(theta_hat)
                .map(|(s, h)| s - h)
                .collect();
            let mut lg = build_linearized(spec, theta_hat, &delta, &batch.inputs)?;
            let out = lg.graph.output;
            let ll = log_lik(&mut lg.graph.tape, spec, out, &batch.targets);
            check_finite(lg.graph.tape.value(ll).as_slice())?;
            let total = lg.graph.tape.sum(ll);
            let mean_nll = lg.graph.tape.affine(total, -1.0 / batch.len() as f64, 0.0);
            let grads = lg.graph.tape.backward(mean_nll);
            Ok(SampleGrad {
                mean_nll: lg.graph.tape.scalar(mean_nll),
                d_theta_hat: flatten(spec, &grads, &lg.graph.layers),
                d_displacement: flatten(spec, &grads, &lg.tangents),
            })
        }
    }
}
