use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::{
    load_csv, load_idx, make_blobs, make_sinusoid, split, BlobsConfig, Mat, SplitSpec, Standardizer, TargetKind,
};
use crate::error::Result;
use crate::net::{Batch, LossKind, ModelSpec};

/// Where a run's data comes from. Written as the `[data]` table of a run
/// config, tagged by `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DataSource {
    /// Validation data are the ten gap points.
    Sinusoid {
        noise_std: f64,
        #[serde(default)]
        seed: u64,
    },
    Blobs {
        #[serde(default)]
        generator: BlobsConfig,
        #[serde(default)]
        split: SplitSpec,
    },
    Csv {
        path: PathBuf,
        target: String,
        target_kind: TargetKind,
        #[serde(default)]
        split: SplitSpec,
    },
    Idx {
        images: PathBuf,
        labels: PathBuf,
        #[serde(default)]
        split: SplitSpec,
    },
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: Batch,
    pub val: Option<Batch>,
    /// Dense 1-D inputs for band export, sinusoid only.
    pub grid: Option<Mat>,
    pub standardizer: Option<Standardizer>,
}

impl Dataset {
    /// Every row, train first.
    pub fn all(&self) -> Result<Batch> {
        match &self.val {
            Some(v) => Batch::concat(&[self.train.clone(), v.clone()]),
            None => Ok(self.train.clone()),
        }
    }
}

impl DataSource {
    pub fn load(&self) -> Result<Dataset> {
        let from_split = |s: super::Split| Dataset {
            train: s.train,
            val: s.val,
            grid: None,
            standardizer: s.standardizer,
        };
        Ok(match self {
            DataSource::Sinusoid { noise_std, seed } => {
                let s = make_sinusoid(*noise_std, *seed)?;
                Dataset {
                    train: s.train,
                    val: Some(s.gap),
                    grid: Some(s.grid),
                    standardizer: None,
                }
            }
            DataSource::Blobs { generator, split: spec } => from_split(split(&make_blobs(generator)?, spec)?),
            DataSource::Csv {
                path,
                target,
                target_kind,
                split,
            } => from_split(load_csv(path, target, *target_kind, split)?),
            DataSource::Idx { images, labels, split } => from_split(load_idx(images, labels, split)?),
        })
    }

    /// Same rows, unsplit and unstandardized, for use as OOD inputs.
    pub fn raw(&self) -> Self {
        let raw = SplitSpec {
            train_fraction: 1.0,
            seed: 0,
            standardize: false,
        };
        let mut out = self.clone();
        match &mut out {
            DataSource::Sinusoid { .. } => {}
            DataSource::Blobs { split, .. } | DataSource::Csv { split, .. } | DataSource::Idx { split, .. } => {
                *split = raw
            }
        }
        out
    }

    /// Problems that can be seen without reading any file, plus missing paths.
    pub fn violations(&self, model: &ModelSpec) -> Vec<String> {
        let mut v = Vec::new();
        let regression = matches!(model.loss, LossKind::GaussianRegression { .. });
        let check_split = |s: &SplitSpec, v: &mut Vec<String>| {
            if !(s.train_fraction > 0.0 && s.train_fraction <= 1.0) {
                v.push(format!("data.split.train_fraction = {} must lie in (0, 1]", s.train_fraction));
            }
        };
        let check_path = |p: &PathBuf, key: &str, v: &mut Vec<String>| {
            if !p.is_file() {
                v.push(format!("data.{key}: {} does not exist", p.display()));
            }
        };
        match self {
            DataSource::Sinusoid { noise_std, .. } => {
                if !(0.0..=1.0).contains(noise_std) {
                    v.push(format!("data.noise_std = {noise_std} must lie in [0, 1]"));
                }
                if !regression || model.input_dim() != 1 || model.output_dim() != 1 {
                    v.push("data.kind = sinusoid needs a 1 → 1 gaussian-regression model".into());
                }
            }
            DataSource::Blobs { generator, split } => {
                check_split(split, &mut v);
                if generator.n_per_class == 0 || generator.dim == 0 {
                    v.push("data.generator needs n_per_class ≥ 1 and dim ≥ 1".into());
                }
                if !(generator.spread > 0.0 && generator.spread.is_finite()) {
                    v.push(format!("data.generator.spread = {} must be positive", generator.spread));
                }
                if regression || model.input_dim() != generator.dim || model.output_dim() != 2 {
                    v.push(format!(
                        "data.kind = blobs needs a {} → 2 categorical model",
                        generator.dim
                    ));
                }
            }
            DataSource::Csv {
                path,
                target_kind,
                split,
                ..
            } => {
                check_split(split, &mut v);
                check_path(path, "path", &mut v);
                if regression != (*target_kind == TargetKind::Value) {
                    v.push("data.target_kind must be value for regression and label for categorical models".into());
                }
            }
            DataSource::Idx { images, labels, split } => {
                check_split(split, &mut v);
                check_path(images, "images", &mut v);
                check_path(labels, "labels", &mut v);
                if regression {
                    v.push("data.kind = idx needs a categorical model".into());
                }
            }
        }
        v
    }
}
