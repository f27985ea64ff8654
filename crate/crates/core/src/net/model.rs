use std::ops::{Deref, DerefMut};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::tape::Mat;
use crate::error::{Error, Result};

/// Flattened network parameters. Layers are stored in order, each as its
/// weight matrix (row-major, `out × in`) followed by its bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

impl Deref for ParamVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ParamVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
    Elu,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
            Activation::Elu => super::tape::elu(x),
            Activation::Identity => x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LossKind {
    /// Softmax cross-entropy over the output logits.
    Categorical,
    /// Independent Gaussian likelihood per output with fixed noise.
    GaussianRegression { noise_std: f64 },
}

/// Architecture of a dense feed-forward network plus its likelihood.
///
/// `layer_sizes` lists the input width, every hidden width and the output
/// width. `activations` has one entry per hidden layer; the output layer is
/// always affine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub layer_sizes: Vec<usize>,
    pub activations: Vec<Activation>,
    pub loss: LossKind,
}

impl ModelSpec {
    pub fn new(layer_sizes: Vec<usize>, activations: Vec<Activation>, loss: LossKind) -> Result<Self> {
        let spec = Self {
            layer_sizes,
            activations,
            loss,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// MLP with the same activation on every hidden layer.
    pub fn mlp(layer_sizes: &[usize], activation: Activation, loss: LossKind) -> Result<Self> {
        let hidden = layer_sizes.len().saturating_sub(2);
        Self::new(layer_sizes.to_vec(), vec![activation; hidden], loss)
    }

    /// A single affine map from inputs to outputs.
    pub fn linear(input: usize, output: usize, loss: LossKind) -> Result<Self> {
        Self::new(vec![input, output], Vec::new(), loss)
    }

    pub fn validate(&self) -> Result<()> {
        let sizes = &self.layer_sizes;
        if sizes.len() < 2 {
            return Err(Error::ModelSpec(
                "need at least input and output layer sizes".into(),
            ));
        }
        if let Some(i) = sizes.iter().position(|&n| n == 0) {
            return Err(Error::ModelSpec(format!("layer {i} has zero width")));
        }
        if self.activations.len() != sizes.len() - 2 {
            return Err(Error::ModelSpec(format!(
                "{} hidden layers but {} activations",
                sizes.len() - 2,
                self.activations.len()
            )));
        }
        match self.loss {
            LossKind::Categorical if self.output_dim() < 2 => Err(Error::ModelSpec(
                "categorical loss needs at least two output classes".into(),
            )),
            LossKind::GaussianRegression { noise_std } if !(noise_std > 0.0 && noise_std.is_finite()) => {
                Err(Error::ModelSpec(format!(
                    "observation noise must be positive, got {noise_std}"
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("validated")
    }

    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    /// `(out, in)` for every affine layer.
    pub fn layer_shapes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.layer_sizes.windows(2).map(|w| (w[1], w[0]))
    }

    pub fn num_params(&self) -> usize {
        self.layer_shapes().map(|(o, i)| o * i + o).sum()
    }

    pub fn activation(&self, layer: usize) -> Activation {
        self.activations
            .get(layer)
            .copied()
            .unwrap_or(Activation::Identity)
    }

    /// LeCun-normal weights, zero biases.
    pub fn init_params(&self, seed: u64) -> ParamVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = Vec::with_capacity(self.num_params());
        for (out, inp) in self.layer_shapes() {
            let scale = (1.0 / inp as f64).sqrt();
            values.extend((0..out * inp).map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                scale * z
            }));
            values.extend(std::iter::repeat_n(0.0, out));
        }
        ParamVector(values)
    }

    /// Splits a flat parameter vector into per-layer `(weights, bias)`.
    pub fn unpack(&self, params: &[f64]) -> Result<Vec<(Mat, Mat)>> {
        self.check_params(params)?;
        let mut offset = 0;
        Ok(self
            .layer_shapes()
            .map(|(out, inp)| {
                let w = Mat::from_row_slice(out, inp, &params[offset..offset + out * inp]);
                offset += out * inp;
                let b = Mat::from_row_slice(1, out, &params[offset..offset + out]);
                offset += out;
                (w, b)
            })
            .collect())
    }

    pub fn pack(&self, layers: &[(Mat, Mat)]) -> Result<ParamVector> {
        if layers.len() != self.num_layers() {
            return Err(Error::Shape(format!(
                "expected {} layers, got {}",
                self.num_layers(),
                layers.len()
            )));
        }
        let mut values = Vec::with_capacity(self.num_params());
        for ((w, b), (out, inp)) in layers.iter().zip(self.layer_shapes()) {
            if w.shape() != (out, inp) || b.shape() != (1, out) {
                return Err(Error::Shape(format!(
                    "layer expects {out}x{inp} weights and 1x{out} bias"
                )));
            }
            for r in 0..out {
                values.extend(w.row(r).iter());
            }
            values.extend(b.iter());
        }
        Ok(ParamVector(values))
    }

    pub fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::Shape(format!(
                "model has {} parameters, got {}",
                self.num_params(),
                params.len()
            )));
        }
        Ok(())
    }

    /// Stable fingerprint of the architecture and likelihood.
    pub fn fingerprint(&self) -> u64 {
        let canonical = serde_json::to_vec(self).expect("model spec serializes");
        let digest = Sha256::digest(&canonical);
        u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    Labels(Vec<usize>),
    Values(Mat),
}

/// A mini-batch: one input row per datum plus matching targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub inputs: Mat,
    pub targets: Targets,
}

impl Batch {
    pub fn new(inputs: Mat, targets: Targets) -> Result<Self> {
        let n = match &targets {
            Targets::Labels(l) => l.len(),
            Targets::Values(v) => v.nrows(),
        };
        if n != inputs.nrows() {
            return Err(Error::Shape(format!(
                "{} input rows but {} targets",
                inputs.nrows(),
                n
            )));
        }
        if n == 0 {
            return Err(Error::Shape("empty batch".into()));
        }
        Ok(Self { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Batch holding the given rows, in order.
    pub fn select(&self, rows: &[usize]) -> Batch {
        let inputs = self.inputs.select_rows(rows.iter());
        let targets = match &self.targets {
            Targets::Labels(l) => Targets::Labels(rows.iter().map(|&i| l[i]).collect()),
            Targets::Values(v) => Targets::Values(v.select_rows(rows.iter())),
        };
        Batch { inputs, targets }
    }

    pub fn concat(batches: &[Batch]) -> Result<Batch> {
        let first = batches
            .first()
            .ok_or_else(|| Error::Shape("nothing to concatenate".into()))?;
        let rows: usize = batches.iter().map(Batch::len).sum();
        let cols = first.inputs.ncols();
        let mut inputs = Mat::zeros(rows, cols);
        let mut r = 0;
        for b in batches {
            if b.inputs.ncols() != cols {
                return Err(Error::Shape("inconsistent input widths".into()));
            }
            inputs.rows_mut(r, b.len()).copy_from(&b.inputs);
            r += b.len();
        }
        let targets = match &first.targets {
            Targets::Labels(_) => {
                let mut all = Vec::with_capacity(rows);
                for b in batches {
                    match &b.targets {
                        Targets::Labels(l) => all.extend_from_slice(l),
                        Targets::Values(_) => return Err(Error::Shape("mixed target kinds".into())),
                    }
                }
                Targets::Labels(all)
            }
            Targets::Values(v0) => {
                let mut all = Mat::zeros(rows, v0.ncols());
                let mut r = 0;
                for b in batches {
                    match &b.targets {
                        Targets::Values(v) => all.rows_mut(r, v.nrows()).copy_from(v),
                        Targets::Labels(_) => return Err(Error::Shape("mixed target kinds".into())),
                    }
                    r += b.len();
                }
                Targets::Values(all)
            }
        };
        Batch::new(inputs, targets)
    }

    /// Checks the batch against the model's input width and likelihood.
    pub fn check(&self, spec: &ModelSpec) -> Result<()> {
        if self.inputs.ncols() != spec.input_dim() {
            return Err(Error::Shape(format!(
                "model takes {} inputs, batch has {}",
                spec.input_dim(),
                self.inputs.ncols()
            )));
        }
        match (&self.targets, spec.loss) {
            (Targets::Labels(l), LossKind::Categorical) => {
                if let Some(bad) = l.iter().find(|&&c| c >= spec.output_dim()) {
                    return Err(Error::Shape(format!(
                        "label {bad} outside {} classes",
                        spec.output_dim()
                    )));
                }
                Ok(())
            }
            (Targets::Values(v), LossKind::GaussianRegression { .. }) => {
                if v.ncols() != spec.output_dim() {
                    return Err(Error::Shape(format!(
                        "model has {} outputs, targets have {}",
                        spec.output_dim(),
                        v.ncols()
                    )));
                }
                Ok(())
            }
            _ => Err(Error::Shape("target kind does not match loss kind".into())),
        }
    }
}
