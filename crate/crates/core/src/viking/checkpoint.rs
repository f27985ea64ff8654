//! Versioned binary container for a trained posterior.
//!
//! Layout (all integers and floats little-endian):
//!
//! | bytes | field                                   |
//! |-------|-----------------------------------------|
//! | 8     | magic `VIKINGCK`                        |
//! | 4     | format version (`u32`, currently 1)     |
//! | 8     | model fingerprint (`u64`)               |
//! | 8     | rng seed (`u64`)                        |
//! | 8     | `log α` (`f64`)                         |
//! | 8     | `log σ_im` (`f64`)                      |
//! | 4     | model spec JSON length `n` (`u32`)      |
//! | n     | model spec JSON (UTF-8)                 |
//! | 8     | parameter count `D` (`u64`)             |
//! | 8·D   | `θ̂` (`f64` each)                        |

use std::io::{Read, Write};
use std::path::Path;

use super::posterior::Posterior;
use crate::error::{Error, Result};
use crate::net::{ModelSpec, ParamVector};

pub const MAGIC: &[u8; 8] = b"VIKINGCK";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub spec: ModelSpec,
    pub posterior: Posterior,
    pub seed: u64,
}

impl Checkpoint {
    pub fn new(spec: ModelSpec, posterior: Posterior, seed: u64) -> Result<Self> {
        spec.check_params(&posterior.theta_hat)?;
        Ok(Self {
            spec,
            posterior,
            seed,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let spec_json = serde_json::to_vec(&self.spec).expect("model spec serializes");
        let theta = &self.posterior.theta_hat;
        let mut out = Vec::with_capacity(60 + spec_json.len() + 8 * theta.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.spec.fingerprint().to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&self.posterior.log_alpha.to_le_bytes());
        out.extend_from_slice(&self.posterior.log_sigma_im.to_le_bytes());
        out.extend_from_slice(&(spec_json.len() as u32).to_le_bytes());
        out.extend_from_slice(&spec_json);
        out.extend_from_slice(&(theta.len() as u64).to_le_bytes());
        for v in theta.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = bytes;
        let mut magic = [0u8; 8];
        read_exact(&mut r, &mut magic, "magic")?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = u32::from_le_bytes(read_array(&mut r, "version")?);
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let fingerprint = u64::from_le_bytes(read_array(&mut r, "fingerprint")?);
        let seed = u64::from_le_bytes(read_array(&mut r, "seed")?);
        let log_alpha = f64::from_le_bytes(read_array(&mut r, "log_alpha")?);
        let log_sigma_im = f64::from_le_bytes(read_array(&mut r, "log_sigma_im")?);
        let spec_len = u32::from_le_bytes(read_array(&mut r, "spec length")?) as usize;
        let mut spec_json = vec![0u8; spec_len];
        read_exact(&mut r, &mut spec_json, "model spec")?;
        let spec: ModelSpec = serde_json::from_slice(&spec_json)
            .map_err(|e| Error::Checkpoint(format!("model spec: {e}")))?;
        spec.validate()?;
        if spec.fingerprint() != fingerprint {
            return Err(Error::Checkpoint("model fingerprint does not match stored spec".into()));
        }
        let d = u64::from_le_bytes(read_array(&mut r, "parameter count")?) as usize;
        if d != spec.num_params() {
            return Err(Error::Checkpoint(format!(
                "{d} parameters stored, model needs {}",
                spec.num_params()
            )));
        }
        if r.len() != 8 * d {
            return Err(Error::Checkpoint(format!(
                "expected {} parameter bytes, found {}",
                8 * d,
                r.len()
            )));
        }
        let theta = r
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        Ok(Self {
            spec,
            posterior: Posterior::new(ParamVector::new(theta), log_alpha, log_sigma_im),
            seed,
        })
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

fn read_exact(r: &mut &[u8], buf: &mut [u8], field: &str) -> Result<()> {
    if r.len() < buf.len() {
        return Err(Error::Checkpoint(format!("truncated at {field}")));
    }
    let (head, tail) = r.split_at(buf.len());
    buf.copy_from_slice(head);
    *r = tail;
    Ok(())
}

fn read_array<const N: usize>(r: &mut &[u8], field: &str) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    read_exact(r, &mut buf, field)?;
    Ok(buf)
}
