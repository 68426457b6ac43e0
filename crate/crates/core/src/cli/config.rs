use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::training::PipelineConfig;

/// Resolved run configuration. Flags override the values of the JSON
/// file passed with `--config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Dataset manifest, or the directory holding `manifest.json`.
    pub data: Option<PathBuf>,
    pub run_dir: PathBuf,
    #[serde(flatten)]
    pub pipeline: PipelineConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: None,
            run_dir: PathBuf::from("runs/default"),
            pipeline: PipelineConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        self.pipeline.validate()
    }

    pub fn manifest(&self) -> Result<PathBuf> {
        let data = self
            .data
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("no dataset given (--data)".into()))?;
        Ok(manifest_path(data))
    }

    /// Hex sha256 of the canonical JSON form.
    /// Digest of everything that affects results; the output directory is
    /// left out so identical runs in different places share a hash.
    pub fn hash(&self) -> String {
        let mut keyed = self.clone();
        keyed.run_dir = PathBuf::new();
        let text = serde_json::to_string(&keyed).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

pub fn manifest_path(data: &Path) -> PathBuf {
    if data.is_dir() {
        data.join("manifest.json")
    } else {
        data.to_path_buf()
    }
}

/// Provenance fields attached to every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
}

impl Provenance {
    pub fn of(config: &RunConfig) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_hash: config.hash(),
        }
    }
}

#[derive(Serialize)]
struct ConfigEcho<'a> {
    #[serde(flatten)]
    provenance: Provenance,
    command: &'a str,
    config: &'a RunConfig,
}

/// Writes `config.json` into the run directory.
pub fn write_echo(config: &RunConfig, command: &str) -> Result<()> {
    let dir = &config.run_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let echo = ConfigEcho {
        provenance: Provenance::of(config),
        command,
        config,
    };
    write_json(&dir.join("config.json"), &echo)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_fills_defaults() {
        let cfg: RunConfig =
            serde_json::from_str(r#"{"train": {"epochs": 3}, "adjacency_kind": "MUL_ED"}"#).unwrap();
        assert_eq!(cfg.pipeline.train.epochs, 3);
        assert_eq!(cfg.pipeline.train.batch_size, 32);
        assert_eq!(cfg.pipeline.adjacency_kind, crate::graph::AdjacencyKind::MulEd);
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.run_dir = "elsewhere".into();
        assert_eq!(a.hash(), b.hash());
        b.pipeline.train.seed = 9;
        assert_ne!(a.hash(), b.hash());
    }
}
