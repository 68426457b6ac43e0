//! Checkpoint files: one JSON header line followed by the raw parameter
//! blob (little-endian `f64`, tensors in [`ModelParams::tensors`] order).

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Hyper, ModelParams};
use crate::error::{Error, Result};

const FORMAT: &str = "mgnet-checkpoint";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub hyper: Hyper,
    pub seed: u64,
    pub params: ModelParams,
    /// Free-form pipeline state (feature kind, scaler, graph).
    pub meta: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    hyper: Hyper,
    seed: u64,
    dtype: String,
    tensors: Vec<TensorEntry>,
    #[serde(default)]
    meta: serde_json::Value,
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    let header = Header {
        format: FORMAT.into(),
        version: VERSION,
        hyper: ckpt.hyper.clone(),
        seed: ckpt.seed,
        dtype: "f64".into(),
        tensors: ckpt
            .params
            .layout()
            .into_iter()
            .map(|(name, shape)| TensorEntry { name, shape })
            .collect(),
        meta: ckpt.meta.clone(),
    };
    let mut bytes = serde_json::to_vec(&header).map_err(|e| Error::json(path, e))?;
    bytes.push(b'\n');
    bytes.reserve(ckpt.params.n_params() * 8);
    for tensor in ckpt.params.tensors() {
        for v in tensor {
            bytes.write_all(&v.to_le_bytes()).expect("write to vec");
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let split = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Checkpoint("missing header line".into()))?;
    let header: Header =
        serde_json::from_slice(&bytes[..split]).map_err(|e| Error::json(path, e))?;
    if header.format != FORMAT || header.version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format {} v{}",
            header.format, header.version
        )));
    }
    header.hyper.validate()?;
    let mut params = ModelParams::zeros(&header.hyper);
    let layout = params.layout();
    let matches = layout.len() == header.tensors.len()
        && layout
            .iter()
            .zip(&header.tensors)
            .all(|((name, shape), e)| *name == e.name && *shape == e.shape);
    if !matches {
        return Err(Error::Checkpoint("tensor table does not match hyperparameters".into()));
    }
    let blob = &bytes[split + 1..];
    let width = match header.dtype.as_str() {
        "f64" => 8,
        "f32" => 4,
        other => return Err(Error::Checkpoint(format!("unsupported dtype {other}"))),
    };
    if blob.len() != params.n_params() * width {
        return Err(Error::Checkpoint(format!(
            "blob holds {} bytes, expected {}",
            blob.len(),
            params.n_params() * width
        )));
    }
    let mut chunks = blob.chunks_exact(width);
    for tensor in params.tensors_mut() {
        for (v, c) in tensor.iter_mut().zip(&mut chunks) {
            *v = if width == 8 {
                f64::from_le_bytes(c.try_into().expect("8 bytes"))
            } else {
                f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64
            };
        }
    }
    Ok(Checkpoint {
        hyper: header.hyper,
        seed: header.seed,
        params,
        meta: header.meta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let hyper = Hyper {
            n_blocks: 2,
            width: 8,
            ..Hyper::default()
        };
        let ckpt = Checkpoint {
            params: ModelParams::init(&hyper, 5).unwrap(),
            hyper,
            seed: 5,
            meta: serde_json::json!({"feature_kind": "DE"}),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&ckpt, &path).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap(), ckpt);
    }

    #[test]
    fn truncated_blob_rejected() {
        let hyper = Hyper {
            n_blocks: 1,
            width: 4,
            ..Hyper::default()
        };
        let ckpt = Checkpoint {
            params: ModelParams::init(&hyper, 1).unwrap(),
            hyper,
            seed: 1,
            meta: serde_json::Value::Null,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&ckpt, &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 3);
        fs::write(&path, bytes).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Checkpoint(_))));
    }
}
