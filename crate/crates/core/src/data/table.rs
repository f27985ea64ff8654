use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{split, Mat, Split, SplitSpec};
use crate::error::{Error, Result};
use crate::net::{Batch, Targets};

/// How the target column is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetKind {
    /// Non-negative integer class labels.
    Label,
    Value,
}

/// Numeric CSV with a header row. Every column but `target` is a feature.
pub fn load_csv(path: &Path, target: &str, kind: TargetKind, spec: &SplitSpec) -> Result<Split> {
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => parse_err(1, format!("{other:?}")),
        })?;
    let header = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    let t = header
        .iter()
        .position(|h| h == target)
        .ok_or_else(|| parse_err(1, format!("no column named {target:?}")))?;
    if header.len() < 2 {
        return Err(parse_err(1, "need at least one feature column".into()));
    }

    let mut features = Vec::new();
    let mut targets = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(line, format!("column {:?}: {field:?} is not a number", &header[j])))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("column {:?}: non-finite value", &header[j])));
            }
            if j == t {
                if kind == TargetKind::Label && (v < 0.0 || v.fract() != 0.0) {
                    return Err(parse_err(line, format!("label {v} is not a non-negative integer")));
                }
                targets.push(v);
            } else {
                features.push(v);
            }
        }
    }
    let n = targets.len();
    if n == 0 {
        return Err(parse_err(1, "no data rows".into()));
    }
    let inputs = Mat::from_row_slice(n, header.len() - 1, &features);
    let targets = match kind {
        TargetKind::Label => Targets::Labels(targets.iter().map(|&v| v as usize).collect()),
        TargetKind::Value => Targets::Values(Mat::from_column_slice(n, 1, &targets)),
    };
    split(&Batch::new(inputs, targets)?, spec)
}
