//! Feature tensors on disk: a JSON manifest plus one raw little-endian
//! `f32` file per tensor (row-major `nodes x features x segments`).

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use super::{FeatureKind, FeatureTensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureManifest {
    pub kind: FeatureKind,
    pub n_nodes: usize,
    pub n_features: usize,
    pub n_segments: usize,
    pub items: Vec<FeatureItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureItem {
    pub path: String,
    pub label: usize,
}

pub fn save_features(tensors: &[FeatureTensor], labels: &[usize], dir: &Path) -> Result<PathBuf> {
    let first = tensors.first().ok_or(Error::Empty("feature tensors"))?;
    if labels.len() != tensors.len() {
        return Err(Error::Shape(format!(
            "{} tensors but {} labels",
            tensors.len(),
            labels.len()
        )));
    }
    let (n, f, t) = first.values.dim();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut items = Vec::with_capacity(tensors.len());
    for (i, (tensor, &label)) in tensors.iter().zip(labels).enumerate() {
        if tensor.values.dim() != (n, f, t) || tensor.kind != first.kind {
            return Err(Error::Shape(format!("feature tensor {i} differs from the first")));
        }
        let name = format!("features_{i:05}.f32");
        let path = dir.join(&name);
        let bytes: Vec<u8> = tensor
            .values
            .iter()
            .flat_map(|&v| (v as f32).to_le_bytes())
            .collect();
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        items.push(FeatureItem { path: name, label });
    }
    let manifest = FeatureManifest {
        kind: first.kind,
        n_nodes: n,
        n_features: f,
        n_segments: t,
        items,
    };
    let path = dir.join("features.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::json(&path, e))?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

pub fn load_features(manifest_path: &Path) -> Result<(Vec<FeatureTensor>, Vec<usize>)> {
    let text = fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let manifest: FeatureManifest =
        serde_json::from_str(&text).map_err(|e| Error::json(manifest_path, e))?;
    let base = manifest_path.parent().unwrap_or(Path::new(""));
    let shape = (manifest.n_nodes, manifest.n_features, manifest.n_segments);
    let expected = 4 * shape.0 * shape.1 * shape.2;
    let mut tensors = Vec::with_capacity(manifest.items.len());
    let mut labels = Vec::with_capacity(manifest.items.len());
    for (index, item) in manifest.items.iter().enumerate() {
        let path = base.join(&item.path);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        if bytes.len() != expected {
            return Err(Error::DimensionMismatch {
                index,
                detail: format!("{} has {} bytes, expected {expected}", path.display(), bytes.len()),
            });
        }
        let values: Vec<f64> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        tensors.push(FeatureTensor {
            values: Array3::from_shape_vec(shape, values).map_err(|e| Error::Shape(e.to_string()))?,
            kind: manifest.kind,
        });
        labels.push(item.label);
    }
    Ok((tensors, labels))
}
