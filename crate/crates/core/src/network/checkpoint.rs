//! Checkpoint files.
//!
//! Layout: the 8-byte magic `PCPCKPT1`, a little-endian `u64` header length,
//! a UTF-8 JSON header, then every parameter as little-endian `f32` values in
//! the order of [`PcpModel::params`]. The header lists each parameter's name
//! and shape; the loader rejects files whose shapes disagree with the
//! architecture described in the header.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelConfig, PcpModel, Real, Tensor};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"PCPCKPT1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub version: u32,
    pub config: ModelConfig,
    pub params: Vec<ParamEntry>,
    /// Free-form training metadata (epoch, loss, seed, ...).
    #[serde(default)]
    pub training: serde_json::Value,
}

pub fn to_bytes<T: Real>(model: &PcpModel<T>, training: serde_json::Value) -> Result<Vec<u8>> {
    let params = model.params();
    let header = CheckpointHeader {
        version: FORMAT_VERSION,
        config: model.config.clone(),
        params: params
            .iter()
            .map(|(name, t)| ParamEntry {
                name: name.clone(),
                shape: t.shape().to_vec(),
            })
            .collect(),
        training,
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(16 + json.len() + model.param_count() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, t) in params {
        for v in t.data() {
            out.extend_from_slice(&(v.to_f64() as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn from_bytes<T: Real>(bytes: &[u8]) -> Result<(PcpModel<T>, CheckpointHeader)> {
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let hlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let body = bytes
        .get(16..16 + hlen)
        .ok_or_else(|| Error::Checkpoint("truncated header".into()))?;
    let header: CheckpointHeader = serde_json::from_slice(body)?;
    if header.version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {}", header.version)));
    }
    let mut model = PcpModel::<T>::build(header.config.clone(), 0)?;
    let mut blob = &bytes[16 + hlen..];
    {
        let params = model.params_mut();
        if params.len() != header.params.len() {
            return Err(Error::Checkpoint(format!(
                "header lists {} parameters, architecture has {}",
                header.params.len(),
                params.len()
            )));
        }
        for ((name, tensor), entry) in params.into_iter().zip(&header.params) {
            if name != entry.name || tensor.shape() != entry.shape.as_slice() {
                return Err(Error::Checkpoint(format!(
                    "parameter {} {:?} does not match architecture {} {:?}",
                    entry.name,
                    entry.shape,
                    name,
                    tensor.shape()
                )));
            }
            let n = tensor.len();
            if blob.len() < n * 4 {
                return Err(Error::Checkpoint("truncated parameter data".into()));
            }
            let data = blob[..n * 4]
                .chunks_exact(4)
                .map(|c| T::from_f64(f32::from_le_bytes(c.try_into().unwrap()) as f64))
                .collect();
            *tensor = Tensor::from_vec(&entry.shape, data)?;
            blob = &blob[n * 4..];
        }
    }
    if !blob.is_empty() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", blob.len())));
    }
    Ok((model, header))
}

pub fn save<T: Real>(path: &Path, model: &PcpModel<T>, training: serde_json::Value) -> Result<()> {
    let bytes = to_bytes(model, training)?;
    fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn load<T: Real>(path: &Path) -> Result<(PcpModel<T>, CheckpointHeader)> {
    let bytes = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    from_bytes(&bytes)
}
