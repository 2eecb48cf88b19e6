//! Weight checkpoint container.
//!
//! Layout: the 8-byte magic `FTSWGT01`, a little-endian `u32` header length,
//! a JSON header (descriptor, its fingerprint, optional training config and
//! a tensor index with offsets in values), then every tensor's values as
//! little-endian `f64` in index order.

use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::descriptor::ArchitectureDescriptor;
use super::train::TrainConfig;
use super::weights::{ModelWeights, Tensor};
use super::Model;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"FTSWGT01";

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    fingerprint: String,
    descriptor: ArchitectureDescriptor,
    train_config: Option<TrainConfig>,
    tensors: Vec<TensorEntry>,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: Model,
    pub train_config: Option<TrainConfig>,
}

pub fn encode_checkpoint(model: &Model, train_config: Option<&TrainConfig>) -> Result<Vec<u8>> {
    let mut offset = 0;
    let tensors = model
        .weights()
        .tensors()
        .iter()
        .map(|t| {
            let e = TensorEntry {
                name: t.name.clone(),
                shape: t.shape.clone(),
                offset,
            };
            offset += t.data.len();
            e
        })
        .collect();
    let header = serde_json::to_vec(&Header {
        fingerprint: model.descriptor().fingerprint(),
        descriptor: model.descriptor().clone(),
        train_config: train_config.cloned(),
        tensors,
    })?;
    let mut out = Vec::with_capacity(12 + header.len() + offset * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for t in model.weights().tensors() {
        for v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < 12 || &bytes[..8] != MAGIC {
        return Err(Error::Format("not a weight checkpoint (bad magic)".into()));
    }
    let hlen = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let body = bytes
        .get(12..12 + hlen)
        .ok_or_else(|| Error::Format("truncated checkpoint header".into()))?;
    let header: Header = serde_json::from_slice(body)?;
    let fingerprint = header.descriptor.fingerprint();
    if fingerprint != header.fingerprint {
        return Err(Error::Format(format!(
            "descriptor fingerprint mismatch: stored {}, computed {fingerprint}",
            header.fingerprint
        )));
    }
    let payload = &bytes[12 + hlen..];
    let total: usize = header.tensors.iter().map(|t| t.shape.iter().product::<usize>()).sum();
    if payload.len() != total * 8 {
        return Err(Error::Format(format!(
            "payload holds {} bytes, index needs {}",
            payload.len(),
            total * 8
        )));
    }
    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let tensors = header
        .tensors
        .into_iter()
        .map(|e| {
            let n: usize = e.shape.iter().product();
            let data = values
                .get(e.offset..e.offset + n)
                .ok_or_else(|| Error::Format(format!("tensor `{}` runs past the payload", e.name)))?
                .to_vec();
            Ok(Tensor {
                name: e.name,
                shape: e.shape,
                data,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let weights = ModelWeights::from_tensors(&header.descriptor, tensors)?;
    Ok(Checkpoint {
        model: Model::new(header.descriptor, weights)?,
        train_config: header.train_config,
    })
}

pub fn save_checkpoint(path: &Path, model: &Model, train_config: Option<&TrainConfig>) -> Result<()> {
    let bytes = encode_checkpoint(model, train_config)?;
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(&bytes)?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    decode_checkpoint(&std::fs::read(path)?)
}
