//! Evaluation metrics over stacks of per-sample predictions.
//!
//! A predictive batch is a slice of `S` matrices, one per posterior sample,
//! each `N × C` (class probabilities) or `N × K` (regression outputs).

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;

pub const DEFAULT_BINS: usize = 15;
pub const PROB_FLOOR: f64 = 1e-12;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

fn check_stack(samples: &[Mat]) -> Result<(usize, usize)> {
    let first = samples
        .first()
        .ok_or_else(|| Error::Metric("no posterior samples".into()))?;
    let shape = first.shape();
    if samples.iter().any(|m| m.shape() != shape) {
        return Err(Error::Shape("posterior samples disagree in shape".into()));
    }
    Ok(shape)
}

/// Row-wise softmax of logits.
pub fn softmax_rows(logits: &Mat) -> Mat {
    let mut out = logits.clone();
    for mut row in out.row_iter_mut() {
        let max = row.max();
        row.apply(|v| *v = (*v - max).exp());
        let total = row.sum();
        row /= total;
    }
    out
}

/// Average of the per-sample matrices.
pub fn mean_predictive(samples: &[Mat]) -> Result<Mat> {
    let (n, c) = check_stack(samples)?;
    let mut mean = Mat::zeros(n, c);
    for s in samples {
        mean += s;
    }
    Ok(mean / samples.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    pub confidence: f64,
    pub nll: f64,
}

fn argmax(row: impl Iterator<Item = f64>) -> (usize, f64) {
    // first maximum wins on ties
    row.enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, p)| if p > best.1 { (i, p) } else { best })
}

fn check_labels(probs: &Mat, labels: &[usize]) -> Result<()> {
    if probs.nrows() != labels.len() {
        return Err(Error::Shape(format!(
            "{} prediction rows for {} labels",
            probs.nrows(),
            labels.len()
        )));
    }
    if probs.nrows() == 0 {
        return Err(Error::Metric("no predictions".into()));
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= probs.ncols()) {
        return Err(Error::Shape(format!("label {l} out of range for {} classes", probs.ncols())));
    }
    Ok(())
}

pub fn classification_metrics(probs: &Mat, labels: &[usize]) -> Result<ClassificationMetrics> {
    check_labels(probs, labels)?;
    let n = labels.len() as f64;
    let (mut correct, mut conf, mut nll) = (0usize, 0.0, 0.0);
    for (row, &y) in probs.row_iter().zip(labels) {
        let (pred, top) = argmax(row.iter().copied());
        correct += usize::from(pred == y);
        conf += top;
        nll -= row[y].max(PROB_FLOOR).ln();
    }
    Ok(ClassificationMetrics {
        accuracy: correct as f64 / n,
        confidence: conf / n,
        nll: nll / n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub ece: f64,
    pub mce: f64,
}

/// Index of the equal-width bin holding confidence `p`; `p = 1` falls in
/// the last bin.
pub fn bin_index(p: f64, bins: usize) -> usize {
    ((p * bins as f64) as usize).min(bins - 1)
}

pub fn calibration(probs: &Mat, labels: &[usize], bins: usize) -> Result<Calibration> {
    if bins == 0 {
        return Err(Error::Metric("calibration needs at least one bin".into()));
    }
    check_labels(probs, labels)?;
    let mut count = vec![0usize; bins];
    let mut hits = vec![0.0; bins];
    let mut conf = vec![0.0; bins];
    for (row, &y) in probs.row_iter().zip(labels) {
        let (pred, top) = argmax(row.iter().copied());
        let b = bin_index(top, bins);
        count[b] += 1;
        conf[b] += top;
        if pred == y {
            hits[b] += 1.0;
        }
    }
    let n = labels.len() as f64;
    let (mut ece, mut mce) = (0.0, 0.0f64);
    for b in 0..bins {
        if count[b] == 0 {
            continue;
        }
        let nb = count[b] as f64;
        let gap = (hits[b] / nb - conf[b] / nb).abs();
        ece += nb / n * gap;
        mce = mce.max(gap);
    }
    Ok(Calibration { ece, mce })
}

/// Largest per-class population variance of the class probabilities across
/// posterior samples for one input. `per_sample` is `S × C`.
pub fn ood_score(per_sample: &Mat) -> Result<f64> {
    let s = per_sample.nrows();
    if s < 2 {
        return Err(Error::Metric(format!("OOD variance needs >= 2 samples, got {s}")));
    }
    let sf = s as f64;
    // deviations from the first sample, so identical samples give exactly 0
    Ok(per_sample
        .column_iter()
        .map(|col| {
            let d: Vec<f64> = col.iter().map(|p| p - col[0]).collect();
            let mean = d.iter().sum::<f64>() / sf;
            d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / sf
        })
        .fold(0.0, f64::max))
}

/// [`ood_score`] for every input of a predictive batch.
pub fn ood_scores(samples: &[Mat]) -> Result<Vec<f64>> {
    let (n, c) = check_stack(samples)?;
    (0..n)
        .map(|i| {
            let m = Mat::from_fn(samples.len(), c, |s, k| samples[s][(i, k)]);
            ood_score(&m)
        })
        .collect()
}

/// Probability that a random OOD score exceeds a random in-distribution
/// score, ties counting one half. Computed from average ranks.
pub fn auroc(in_dist: &[f64], ood: &[f64]) -> Result<f64> {
    if in_dist.is_empty() || ood.is_empty() {
        return Err(Error::Metric("AUROC needs both score sets non-empty".into()));
    }
    if in_dist.iter().chain(ood).any(|v| v.is_nan()) {
        return Err(Error::Metric("NaN score".into()));
    }
    let mut all: Vec<(f64, bool)> = in_dist
        .iter()
        .map(|&v| (v, false))
        .chain(ood.iter().map(|&v| (v, true)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    // twice the rank sum of the OOD scores, so tied ranks stay integral
    let mut rank2_sum: u128 = 0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        // 1-based ranks i+1 ..= j+1 share the average (i + j + 2) / 2
        let avg2 = (i + j + 2) as u128;
        let k = all[i..=j].iter().filter(|e| e.1).count() as u128;
        rank2_sum += k * avg2;
        i = j + 1;
    }
    let (m, n) = (ood.len() as u128, in_dist.len() as u128);
    // U = R − m(m+1)/2, so 2U = 2R − m(m+1)
    let u2 = rank2_sum - m * (m + 1);
    Ok(u2 as f64 / (2 * m * n) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bands {
    pub mean: Mat,
    pub std: Mat,
}

/// Pointwise mean and sample standard deviation (divisor `S − 1`).
pub fn regression_bands(samples: &[Mat]) -> Result<Bands> {
    let (n, k) = check_stack(samples)?;
    if samples.len() < 2 {
        return Err(Error::Metric("bands need >= 2 samples".into()));
    }
    let base = &samples[0];
    let shift = mean_predictive(&samples.iter().map(|s| s - base).collect::<Vec<_>>())?;
    let mut var = Mat::zeros(n, k);
    for s in samples {
        let d = s - base - &shift;
        var += d.component_mul(&d);
    }
    let std = (var / (samples.len() - 1) as f64).map(f64::sqrt);
    Ok(Bands {
        mean: base + shift,
        std,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub rmse: f64,
    /// Mean NLL of the Gaussian mixture `(1/S) Σ_s N(y | f_s(x), σ²)`.
    pub nll: f64,
}

pub fn regression_metrics(samples: &[Mat], targets: &Mat, noise_std: f64) -> Result<RegressionMetrics> {
    let (n, k) = check_stack(samples)?;
    if targets.shape() != (n, k) {
        return Err(Error::Shape(format!(
            "targets are {:?}, predictions {:?}",
            targets.shape(),
            (n, k)
        )));
    }
    if n == 0 {
        return Err(Error::Metric("no predictions".into()));
    }
    let mean = mean_predictive(samples)?;
    let rmse = ((&mean - targets).norm_squared() / (n * k) as f64).sqrt();
    let ln_s = (samples.len() as f64).ln();
    let mut nll = 0.0;
    for i in 0..n {
        let lls: Vec<f64> = samples
            .iter()
            .map(|s| {
                (0..k)
                    .map(|j| {
                        let r = (s[(i, j)] - targets[(i, j)]) / noise_std;
                        -0.5 * r * r - noise_std.ln() - HALF_LN_2PI
                    })
                    .sum()
            })
            .collect();
        let max = lls.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + lls.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        nll -= lse - ln_s;
    }
    Ok(RegressionMetrics { rmse, nll: nll / n as f64 })
}

/// Flat metric record keyed by name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MetricsRecord(pub BTreeMap<String, f64>);

impl MetricsRecord {
    pub fn insert(&mut self, key: impl Into<String>, value: f64) {
        self.0.insert(key.into(), value);
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.0.get(key).copied()
    }

    pub fn extend_prefixed(&mut self, prefix: &str, other: &MetricsRecord) {
        for (k, v) in &other.0 {
            self.0.insert(format!("{prefix}{k}"), *v);
        }
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        let mut out = serde_json::to_vec_pretty(self)?;
        out.push(b'\n');
        Ok(out)
    }
}

impl From<ClassificationMetrics> for MetricsRecord {
    fn from(m: ClassificationMetrics) -> Self {
        let mut r = Self::default();
        r.insert("accuracy", m.accuracy);
        r.insert("confidence", m.confidence);
        r.insert("nll", m.nll);
        r
    }
}

impl From<RegressionMetrics> for MetricsRecord {
    fn from(m: RegressionMetrics) -> Self {
        let mut r = Self::default();
        r.insert("rmse", m.rmse);
        r.insert("nll", m.nll);
        r
    }
}

#[cfg(test)]
mod tests;
