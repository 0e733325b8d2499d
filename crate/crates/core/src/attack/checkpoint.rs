//! Checkpoint files: a JSON header followed by the raw parameters.
//!
//! ```text
//! b"MIAC" | version u32 = 1 | header length u32 | header JSON (UTF-8)
//!         | param_count float64 values, little-endian, in `param_order`
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::nets::{NetShape, Parameters, SpeakerNet, UtteranceNet};
use super::train::TrainConfig;
use super::AttackModel;
use crate::error::{Error, Result};
use crate::scoring::Level;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"MIAC";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub level: Level,
    pub q: usize,
    pub p: usize,
    pub r: usize,
    pub seed: Option<u64>,
    pub train: Option<TrainConfig>,
    pub param_count: usize,
    pub param_order: Vec<String>,
}

fn header_for(model: &AttackModel, train: Option<&TrainConfig>) -> CheckpointHeader {
    let (q, shape, names, count) = match model {
        AttackModel::Utterance(n) => (n.q(), n.shape(), n.tensor_names(), n.num_params()),
        AttackModel::Speaker(n) => (n.q(), n.shape(), n.tensor_names(), n.num_params()),
    };
    CheckpointHeader {
        level: model.level(),
        q,
        p: shape.p,
        r: shape.r,
        seed: train.map(|t| t.seed),
        train: train.copied(),
        param_count: count,
        param_order: names.iter().map(|s| s.to_string()).collect(),
    }
}

pub fn encode_checkpoint(model: &AttackModel, train: Option<&TrainConfig>) -> Result<Vec<u8>> {
    let header = serde_json::to_vec(&header_for(model, train))?;
    let params = model.to_flat();
    let mut buf = Vec::with_capacity(12 + header.len() + params.len() * 8);
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(header.len() as u32).to_le_bytes());
    buf.extend_from_slice(&header);
    for v in params {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    Ok(buf)
}

pub fn save_checkpoint(path: impl AsRef<Path>, model: &AttackModel, train: Option<&TrainConfig>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_checkpoint(model, train)?).map_err(|e| Error::io(path, e))
}

pub fn decode_checkpoint(path: &Path, bytes: &[u8]) -> Result<(AttackModel, CheckpointHeader)> {
    if bytes.len() < 12 || &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(Error::format(path, "not a checkpoint (bad magic)"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::format(path, format!("unsupported checkpoint version {version}")));
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let header_end = 12 + header_len;
    if bytes.len() < header_end {
        return Err(Error::format(path, "truncated checkpoint header"));
    }
    let header: CheckpointHeader = serde_json::from_slice(&bytes[12..header_end])?;
    let blob = &bytes[header_end..];
    if blob.len() != header.param_count * 8 {
        return Err(Error::format(
            path,
            format!(
                "parameter blob is {} bytes, header declares {} values",
                blob.len(),
                header.param_count
            ),
        ));
    }
    let flat: Vec<f64> = blob
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let shape = NetShape {
        p: header.p,
        r: header.r,
    };
    let mut model = match header.level {
        Level::Utterance => AttackModel::Utterance(UtteranceNet::zeros(header.q, shape)),
        Level::Speaker => AttackModel::Speaker(SpeakerNet::zeros(header.q, shape)),
    };
    let names = match &model {
        AttackModel::Utterance(n) => n.tensor_names(),
        AttackModel::Speaker(n) => n.tensor_names(),
    };
    if header.param_order != names {
        return Err(Error::format(path, "parameter order does not match this engine"));
    }
    model.set_flat(&flat).map_err(|e| Error::format(path, e.to_string()))?;
    model.validate()?;
    Ok((model, header))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(AttackModel, CheckpointHeader)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(path, &bytes)
}
