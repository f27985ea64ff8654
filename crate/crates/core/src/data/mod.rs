//! Toy generators, train/validation splitting and file loaders.

mod idx;
mod source;
mod table;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

pub use idx::{load_idx, read_idx_images, read_idx_labels, write_idx_images, write_idx_labels, IMAGE_MAGIC, LABEL_MAGIC};
pub use source::{DataSource, Dataset};
pub use table::{load_csv, TargetKind};

use crate::error::{Error, Result};
use crate::net::{Batch, Targets};

pub type Mat = DMatrix<f64>;

pub const SINUSOID_RANGE: (f64, f64) = (0.35, 0.65);
pub const SINUSOID_POINTS: usize = 20;
/// Indices of the 20 equally spaced points that are kept for training.
pub const SINUSOID_KEPT: [usize; 10] = [0, 1, 2, 3, 4, 15, 16, 17, 18, 19];
pub const SINUSOID_GRID: (f64, f64, usize) = (0.25, 0.75, 200);

pub fn sinusoid_mean(x: f64) -> f64 {
    5.0 * (10.0 * x).sin()
}

#[derive(Debug, Clone)]
pub struct Sinusoid {
    /// The ten points either side of the gap.
    pub train: Batch,
    /// The ten dropped middle points, with their own noise draws.
    pub gap: Batch,
    /// `200 × 1` evaluation inputs.
    pub grid: Mat,
}

pub fn sinusoid_x() -> Vec<f64> {
    let (lo, hi) = SINUSOID_RANGE;
    let step = (hi - lo) / (SINUSOID_POINTS - 1) as f64;
    (0..SINUSOID_POINTS).map(|i| lo + step * i as f64).collect()
}

pub fn sinusoid_grid() -> Mat {
    let (lo, hi, n) = SINUSOID_GRID;
    let step = (hi - lo) / (n - 1) as f64;
    Mat::from_fn(n, 1, |i, _| lo + step * i as f64)
}

/// `y = 5 sin(10x) + N(0, s²)` on 20 equally spaced points of
/// `[0.35, 0.65]`, keeping the first and last five.
pub fn make_sinusoid(noise_std: f64, seed: u64) -> Result<Sinusoid> {
    if !(0.0..=1.0).contains(&noise_std) {
        return Err(Error::Contract(format!("sinusoid noise std {noise_std} outside [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs = sinusoid_x();
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sinusoid_mean(x) + noise_std * z
        })
        .collect();
    let pick = |idx: &[usize]| {
        let x = Mat::from_fn(idx.len(), 1, |i, _| xs[idx[i]]);
        let y = Mat::from_fn(idx.len(), 1, |i, _| ys[idx[i]]);
        Batch::new(x, Targets::Values(y))
    };
    let gap: Vec<usize> = (0..SINUSOID_POINTS).filter(|i| !SINUSOID_KEPT.contains(i)).collect();
    Ok(Sinusoid {
        train: pick(&SINUSOID_KEPT)?,
        gap: pick(&gap)?,
        grid: sinusoid_grid(),
    })
}

/// Two Gaussian classes centred at `∓separation/2` along the first axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlobsConfig {
    pub n_per_class: usize,
    pub dim: usize,
    pub separation: f64,
    pub spread: f64,
    pub seed: u64,
}

impl Default for BlobsConfig {
    fn default() -> Self {
        Self {
            n_per_class: 100,
            dim: 2,
            separation: 2.0,
            spread: 1.0,
            seed: 0,
        }
    }
}

pub fn make_blobs(cfg: &BlobsConfig) -> Result<Batch> {
    if cfg.n_per_class == 0 || cfg.dim == 0 {
        return Err(Error::Contract("blobs need at least one point and one dimension".into()));
    }
    let noise = Normal::new(0.0, cfg.spread).map_err(|e| Error::Contract(format!("blob spread: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = 2 * cfg.n_per_class;
    let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
    let mut x = Mat::zeros(n, cfg.dim);
    for i in 0..n {
        for j in 0..cfg.dim {
            let centre = if j == 0 {
                (labels[i] as f64 - 0.5) * cfg.separation
            } else {
                0.0
            };
            x[(i, j)] = centre + noise.sample(&mut rng);
        }
    }
    Batch::new(x, Targets::Labels(labels))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub standardize: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.9,
            seed: 0,
            standardize: true,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return Err(Error::Contract(format!(
                "train fraction {} outside (0, 1]",
                self.train_fraction
            )));
        }
        Ok(())
    }
}

pub const STANDARDIZE_EPS: f64 = 1e-12;

/// Per-column affine map fitted on the training inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Mat) -> Self {
        let n = x.nrows() as f64;
        let mut mean = Vec::with_capacity(x.ncols());
        let mut std = Vec::with_capacity(x.ncols());
        for col in x.column_iter() {
            let m = col.sum() / n;
            let var = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
            mean.push(m);
            std.push(var.sqrt().max(STANDARDIZE_EPS));
        }
        Self { mean, std }
    }

    pub fn apply(&self, x: &Mat) -> Mat {
        Mat::from_fn(x.nrows(), x.ncols(), |i, j| (x[(i, j)] - self.mean[j]) / self.std[j])
    }

    pub fn invert(&self, z: &Mat) -> Mat {
        Mat::from_fn(z.nrows(), z.ncols(), |i, j| z[(i, j)] * self.std[j] + self.mean[j])
    }
}

#[derive(Debug, Clone)]
pub struct Split {
    pub train: Batch,
    pub val: Option<Batch>,
    pub standardizer: Option<Standardizer>,
}

/// Seeded shuffle into train and validation parts, then optional
/// standardization of the inputs with training statistics.
pub fn split(data: &Batch, spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    let n = data.len();
    let n_train = ((spec.train_fraction * n as f64).round() as usize).clamp(1, n);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let mut train = data.select(&idx[..n_train]);
    let mut val = (n_train < n).then(|| data.select(&idx[n_train..]));
    let standardizer = spec.standardize.then(|| Standardizer::fit(&train.inputs));
    if let Some(s) = &standardizer {
        train.inputs = s.apply(&train.inputs);
        if let Some(v) = &mut val {
            v.inputs = s.apply(&v.inputs);
        }
    }
    Ok(Split {
        train,
        val,
        standardizer,
    })
}
