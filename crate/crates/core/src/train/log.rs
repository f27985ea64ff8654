use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Warmup,
    SigmaTune,
    Elbo,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Warmup => "warmup",
            Phase::SigmaTune => "sigma-tune",
            Phase::Elbo => "elbo",
        }
    }
}

/// Fit of the mean parameters on one split. Exactly one of `accuracy` and
/// `rmse` is set, depending on the loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitScore {
    pub nll: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rmse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// Running index over all phases, starting at 1.
    pub epoch: usize,
    pub phase: Phase,
    pub phase_epoch: usize,
    pub train: SplitScore,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub val: Option<SplitScore>,
    /// Mean per-step ELBO estimate; absent during warmup.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elbo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kl: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_hat: Option<f64>,
    #[serde(with = "crate::io::extended_f64")]
    pub log_alpha: f64,
    #[serde(with = "crate::io::extended_f64")]
    pub log_sigma_im: f64,
    #[serde(with = "crate::io::extended_f64")]
    pub sigma_ker: f64,
    #[serde(with = "crate::io::extended_f64")]
    pub sigma_im: f64,
    /// Mean `|⟨ε_ker, ε_im⟩| / ‖ε^(s,0)‖²` over the epoch's steps.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub im_overlap: Option<f64>,
    /// Largest relative CG residual seen during the epoch.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cg_residual: Option<f64>,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
}

impl TrainLog {
    pub fn push(&mut self, mut record: EpochRecord) {
        record.epoch = self.records.len() + 1;
        self.records.push(record);
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    pub fn phase(&self, phase: Phase) -> impl Iterator<Item = &EpochRecord> {
        self.records.iter().filter(move |r| r.phase == phase)
    }

    /// Copy with timing zeroed, for comparing runs.
    pub fn without_timing(&self) -> Self {
        let mut out = self.clone();
        for r in &mut out.records {
            r.wall_seconds = 0.0;
        }
        out
    }

    pub fn to_jsonl(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(out)
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<std::result::Result<_, _>>()?;
        Ok(Self { records })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, &self.to_jsonl()?)
    }
}
