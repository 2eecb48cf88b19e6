//! Epoch files, group files and atomic writes.
//!
//! An epoch file is one line of compact JSON (the [`EpochFileHeader`]),
//! a newline, then every sample as a little-endian `f32`, epoch-major and
//! channel-major within an epoch. Samples are computed on as `f64` and
//! rounded to `f32` when written.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::signal::{ChannelRole, Epoch, Signal};

pub const EPOCH_FILE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochFileHeader {
    pub version: u32,
    pub n_epochs: usize,
    pub n_channels: usize,
    pub channel_roles: Vec<ChannelRole>,
    pub sample_rate_hz: f64,
    pub epoch_len_samples: usize,
    pub label_vocabulary: Vec<String>,
    pub record_ids: Vec<String>,
    pub labels: Vec<usize>,
}

pub fn encode_dataset(dataset: &Dataset) -> Result<Vec<u8>> {
    let first = dataset.epochs().first();
    let header = EpochFileHeader {
        version: EPOCH_FILE_VERSION,
        n_epochs: dataset.len(),
        n_channels: first.map_or(0, Epoch::n_channels),
        channel_roles: dataset.channel_roles().to_vec(),
        sample_rate_hz: first.map_or(0.0, Epoch::sample_rate_hz),
        epoch_len_samples: first.map_or(0, Epoch::len),
        label_vocabulary: dataset.vocabulary().to_vec(),
        record_ids: dataset.record_ids().to_vec(),
        labels: dataset.labels(),
    };
    let mut out = serde_json::to_vec(&header)?;
    out.push(b'\n');
    out.reserve(header.n_epochs * header.n_channels * header.epoch_len_samples * 4);
    for (i, e) in dataset.epochs().iter().enumerate() {
        for ch in e.channels() {
            for &v in ch.samples() {
                let f = v as f32;
                if !f.is_finite() {
                    return Err(Error::invalid(format!("epoch {i}: sample {v} does not fit a 32-bit float")));
                }
                out.extend_from_slice(&f.to_le_bytes());
            }
        }
    }
    Ok(out)
}

pub fn decode_dataset(bytes: &[u8]) -> Result<Dataset> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Format("epoch file has no header line".into()))?;
    let h: EpochFileHeader =
        serde_json::from_slice(&bytes[..nl]).map_err(|e| Error::Format(format!("epoch file header: {e}")))?;
    if h.version != EPOCH_FILE_VERSION {
        return Err(Error::Format(format!("unsupported epoch file version {}", h.version)));
    }
    if h.labels.len() != h.n_epochs || h.record_ids.len() != h.n_epochs {
        return Err(Error::Format("label or record id count differs from n_epochs".into()));
    }
    if h.channel_roles.len() != h.n_channels {
        return Err(Error::Format("channel role count differs from n_channels".into()));
    }
    let payload = &bytes[nl + 1..];
    let per_epoch = h.n_channels * h.epoch_len_samples;
    let expected = h.n_epochs * per_epoch * 4;
    if payload.len() != expected {
        return Err(Error::Format(format!(
            "payload holds {} bytes, header implies {expected}",
            payload.len()
        )));
    }
    let values: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    let epochs = (0..h.n_epochs)
        .map(|i| {
            let channels = (0..h.n_channels)
                .map(|c| {
                    let s = i * per_epoch + c * h.epoch_len_samples;
                    Signal::new(values[s..s + h.epoch_len_samples].to_vec(), h.sample_rate_hz)
                })
                .collect::<Result<_>>()?;
            Epoch::new(channels, h.channel_roles.clone(), h.labels[i])
        })
        .collect::<Result<_>>()?;
    Dataset::new(epochs, h.record_ids, h.label_vocabulary)
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so the target never holds a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn write_dataset(path: &Path, dataset: &Dataset) -> Result<()> {
    write_atomic(path, &encode_dataset(dataset)?)
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    decode_dataset(&std::fs::read(path)?)
}

/// Two columns, `record_id` and `group_id`, separated by a comma, tab or
/// spaces. Blank lines and `#` comments are skipped.
pub fn parse_groups(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .collect();
        let [record, group] = fields.as_slice() else {
            return Err(Error::Format(format!("groups line {}: expected two columns", n + 1)));
        };
        if map.insert(record.to_string(), group.to_string()).is_some() {
            return Err(Error::Format(format!("groups line {}: record `{record}` listed twice", n + 1)));
        }
    }
    Ok(map)
}

pub fn format_groups(groups: &BTreeMap<String, String>) -> String {
    groups.iter().map(|(r, g)| format!("{r}\t{g}\n")).collect()
}

pub fn read_groups(path: &Path) -> Result<BTreeMap<String, String>> {
    parse_groups(&std::fs::read_to_string(path)?)
}
