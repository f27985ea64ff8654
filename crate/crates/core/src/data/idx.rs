use std::path::Path;

use super::{split, Mat, Split, SplitSpec};
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::net::{Batch, Targets};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

fn idx_err(field: &'static str, message: impl Into<String>) -> Error {
    Error::IdxFormat {
        field,
        message: message.into(),
    }
}

/// Big-endian header: magic then `ndims` dimension words.
fn parse_header(bytes: &[u8], magic: u32) -> Result<(Vec<usize>, &[u8])> {
    let word = |i: usize| -> Option<u32> {
        bytes
            .get(4 * i..4 * i + 4)
            .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    };
    let found = word(0).ok_or_else(|| idx_err("magic", format!("file is {} bytes", bytes.len())))?;
    if found != magic {
        return Err(idx_err("magic", format!("expected {magic:#010x}, found {found:#010x}")));
    }
    let ndims = (magic & 0xff) as usize;
    let dims = (1..=ndims)
        .map(|i| {
            word(i)
                .map(|d| d as usize)
                .ok_or_else(|| idx_err("dimensions", format!("header ends before dimension {i} of {ndims}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((dims, &bytes[4 * (ndims + 1)..]))
}

fn payload<'a>(data: &'a [u8], dims: &[usize]) -> Result<&'a [u8]> {
    let want = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| idx_err("dimensions", format!("{dims:?} overflows")))?;
    if data.len() != want {
        return Err(idx_err("data", format!("expected {want} bytes, found {}", data.len())));
    }
    Ok(data)
}

/// `n × (rows·cols)` matrix of pixels scaled to `[0, 1]`.
pub fn read_idx_images(path: &Path) -> Result<Mat> {
    let bytes = std::fs::read(path)?;
    let (dims, data) = parse_header(&bytes, IMAGE_MAGIC)?;
    let data = payload(data, &dims)?;
    let (n, width) = (dims[0], dims[1] * dims[2]);
    if n == 0 || width == 0 {
        return Err(idx_err("dimensions", format!("empty image set {dims:?}")));
    }
    Ok(Mat::from_fn(n, width, |i, j| f64::from(data[i * width + j]) / 255.0))
}

pub fn read_idx_labels(path: &Path) -> Result<Vec<usize>> {
    let bytes = std::fs::read(path)?;
    let (dims, data) = parse_header(&bytes, LABEL_MAGIC)?;
    Ok(payload(data, &dims)?.iter().map(|&b| usize::from(b)).collect())
}

pub fn load_idx(images: &Path, labels: &Path, spec: &SplitSpec) -> Result<Split> {
    let x = read_idx_images(images)?;
    let y = read_idx_labels(labels)?;
    if x.nrows() != y.len() {
        return Err(idx_err("count", format!("{} images but {} labels", x.nrows(), y.len())));
    }
    split(&Batch::new(x, Targets::Labels(y))?, spec)
}

pub fn write_idx_images(path: &Path, rows: usize, cols: usize, pixels: &[Vec<u8>]) -> Result<()> {
    if pixels.iter().any(|p| p.len() != rows * cols) {
        return Err(Error::Shape(format!("every image must hold {rows}×{cols} pixels")));
    }
    let mut out = IMAGE_MAGIC.to_be_bytes().to_vec();
    for d in [pixels.len(), rows, cols] {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    pixels.iter().for_each(|p| out.extend_from_slice(p));
    write_atomic(path, &out)
}

pub fn write_idx_labels(path: &Path, labels: &[u8]) -> Result<()> {
    let mut out = LABEL_MAGIC.to_be_bytes().to_vec();
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    write_atomic(path, &out)
}
