//! Dataset loading, validation, filtering and cue-aligned windowing.
//!
//! On disk a dataset is a JSON manifest plus one headerless file per trial
//! holding little-endian `f32` samples in row-major `channels x samples`
//! order. Trial paths in the manifest are relative to the manifest's
//! directory.

mod filter;

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

pub use filter::{BandpassFilter, Biquad};

use crate::error::{Error, Result};

/// Seconds of signal kept before the cue.
pub const PRE_CUE_SECONDS: f64 = 0.5;
/// Seconds of signal kept from the cue onward.
pub const POST_CUE_SECONDS: f64 = 4.0;
/// Prototype order of the default Butterworth design.
pub const DEFAULT_FILTER_ORDER: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    /// `channels x samples`, microvolts.
    pub samples: Array2<f64>,
    pub label: usize,
    pub subject_id: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialSet {
    pub trials: Vec<Trial>,
    pub fs: f64,
    pub channel_names: Vec<String>,
    pub class_names: Vec<String>,
}

impl TrialSet {
    pub fn n_channels(&self) -> usize {
        self.channel_names.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    /// Samples per trial, or `None` for an empty set.
    pub fn n_samples(&self) -> Option<usize> {
        self.trials.first().map(|t| t.samples.ncols())
    }

    pub fn labels(&self) -> Vec<usize> {
        self.trials.iter().map(|t| t.label).collect()
    }

    /// Subset in the given index order.
    pub fn select(&self, indices: &[usize]) -> TrialSet {
        TrialSet {
            trials: indices.iter().map(|&i| self.trials[i].clone()).collect(),
            fs: self.fs,
            channel_names: self.channel_names.clone(),
            class_names: self.class_names.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestTrial {
    pub path: String,
    pub label: i64,
    pub subject: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub fs: f64,
    pub n_channels: usize,
    pub channel_names: Vec<String>,
    pub classes: Vec<String>,
    /// Optional fixed sample count per trial.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<usize>,
    pub trials: Vec<ManifestTrial>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest: Manifest =
            serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        manifest.check_header()?;
        Ok(manifest)
    }

    fn check_header(&self) -> Result<()> {
        if !(self.fs.is_finite() && self.fs > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "manifest fs must be positive, got {}",
                self.fs
            )));
        }
        if self.n_channels < 2 {
            return Err(Error::InvalidArgument(format!(
                "manifest needs at least 2 channels, got {}",
                self.n_channels
            )));
        }
        if self.channel_names.len() != self.n_channels {
            return Err(Error::InvalidArgument(format!(
                "manifest lists {} channel names for n_channels={}",
                self.channel_names.len(),
                self.n_channels
            )));
        }
        if self.classes.len() < 2 {
            return Err(Error::InvalidArgument(
                "manifest needs at least 2 classes".into(),
            ));
        }
        Ok(())
    }
}

/// Outcome of [`validate_dataset`]: every per-trial problem, not just the first.
#[derive(Debug)]
pub struct ValidationReport {
    pub n_trials: usize,
    pub issues: Vec<Error>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.issues.is_empty()
    }
}

fn read_trial(
    base: &Path,
    index: usize,
    entry: &ManifestTrial,
    manifest: &Manifest,
    expected_samples: Option<usize>,
) -> Result<Trial> {
    let path = base.join(&entry.path);
    if !path.is_file() {
        return Err(Error::MissingTrialFile { index, path });
    }
    if entry.label < 0 || entry.label as usize >= manifest.classes.len() {
        return Err(Error::InvalidLabel {
            index,
            label: entry.label,
            n_classes: manifest.classes.len(),
        });
    }
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let n = manifest.n_channels;
    let row_bytes = 4 * n;
    if bytes.len() % 4 != 0 || bytes.len() % row_bytes != 0 {
        return Err(Error::DimensionMismatch {
            index,
            detail: format!(
                "{} holds {} bytes, not a whole number of {n}-channel f32 columns",
                path.display(),
                bytes.len()
            ),
        });
    }
    let n_samples = bytes.len() / row_bytes;
    if let Some(expected) = expected_samples {
        if n_samples != expected {
            return Err(Error::DimensionMismatch {
                index,
                detail: format!(
                    "{} has {n_samples} samples per channel, expected {expected}",
                    path.display()
                ),
            });
        }
    }
    let values: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteSample {
            index,
            channel: pos / n_samples,
            sample: pos % n_samples,
        });
    }
    let samples = Array2::from_shape_vec((n, n_samples), values)
        .map_err(|e| Error::Shape(e.to_string()))?;
    Ok(Trial {
        samples,
        label: entry.label as usize,
        subject_id: entry.subject,
    })
}

fn manifest_dir(manifest_path: &Path) -> PathBuf {
    manifest_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default()
}

/// Loads and validates a dataset, failing on the first bad trial.
pub fn load_dataset(manifest_path: &Path) -> Result<TrialSet> {
    let manifest = Manifest::read(manifest_path)?;
    let base = manifest_dir(manifest_path);
    let mut expected = manifest.n_samples;
    let mut trials = Vec::with_capacity(manifest.trials.len());
    for (index, entry) in manifest.trials.iter().enumerate() {
        let trial = read_trial(&base, index, entry, &manifest, expected)?;
        expected.get_or_insert(trial.samples.ncols());
        trials.push(trial);
    }
    Ok(TrialSet {
        trials,
        fs: manifest.fs,
        channel_names: manifest.channel_names,
        class_names: manifest.classes,
    })
}

/// Checks every trial and collects all issues. Manifest-level problems
/// are returned as `Err`.
pub fn validate_dataset(manifest_path: &Path) -> Result<ValidationReport> {
    let manifest = Manifest::read(manifest_path)?;
    let base = manifest_dir(manifest_path);
    let mut expected = manifest.n_samples;
    let mut issues = Vec::new();
    for (index, entry) in manifest.trials.iter().enumerate() {
        match read_trial(&base, index, entry, &manifest, expected) {
            Ok(trial) => {
                expected.get_or_insert(trial.samples.ncols());
            }
            Err(e) => issues.push(e),
        }
    }
    Ok(ValidationReport {
        n_trials: manifest.trials.len(),
        issues,
    })
}

/// Writes `manifest.json` and one `trial_XXXXX.f32` per trial into `dir`.
/// Samples are stored as `f32`.
pub fn save_dataset(set: &TrialSet, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(set.trials.len());
    for (i, trial) in set.trials.iter().enumerate() {
        if trial.samples.nrows() != set.n_channels() {
            return Err(Error::DimensionMismatch {
                index: i,
                detail: format!(
                    "trial has {} channels, set declares {}",
                    trial.samples.nrows(),
                    set.n_channels()
                ),
            });
        }
        let name = format!("trial_{i:05}.f32");
        let path = dir.join(&name);
        let bytes: Vec<u8> = trial
            .samples
            .iter()
            .flat_map(|&v| (v as f32).to_le_bytes())
            .collect();
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        entries.push(ManifestTrial {
            path: name,
            label: trial.label as i64,
            subject: trial.subject_id,
        });
    }
    let manifest = Manifest {
        fs: set.fs,
        n_channels: set.n_channels(),
        channel_names: set.channel_names.clone(),
        classes: set.class_names.clone(),
        n_samples: set.n_samples(),
        trials: entries,
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::json(&path, e))?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Zero-phase band-pass of every channel of a trial.
pub fn bandpass_filter(trial: &Trial, lo: f64, hi: f64, fs: f64) -> Result<Trial> {
    let filter = BandpassFilter::design(lo, hi, fs, DEFAULT_FILTER_ORDER)?;
    Ok(Trial {
        samples: filter_channels(&filter, &trial.samples),
        label: trial.label,
        subject_id: trial.subject_id,
    })
}

/// Applies `filter` row by row.
pub fn filter_channels(filter: &BandpassFilter, samples: &Array2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros(samples.raw_dim());
    for (src, mut dst) in samples.rows().into_iter().zip(out.rows_mut()) {
        let row: Vec<f64> = src.iter().copied().collect();
        for (d, v) in dst.iter_mut().zip(filter.apply_zero_phase(&row)) {
            *d = v;
        }
    }
    out
}

/// Band-passes a whole set with one shared filter design.
pub fn bandpass_set(set: &TrialSet, lo: f64, hi: f64) -> Result<TrialSet> {
    let filter = BandpassFilter::design(lo, hi, set.fs, DEFAULT_FILTER_ORDER)?;
    Ok(TrialSet {
        trials: set
            .trials
            .iter()
            .map(|t| Trial {
                samples: filter_channels(&filter, &t.samples),
                label: t.label,
                subject_id: t.subject_id,
            })
            .collect(),
        fs: set.fs,
        channel_names: set.channel_names.clone(),
        class_names: set.class_names.clone(),
    })
}

/// Number of samples in a cue-aligned window.
pub fn window_len(fs: f64) -> usize {
    ((PRE_CUE_SECONDS + POST_CUE_SECONDS) * fs).round() as usize
}

/// Cuts `round(4.5 fs)` samples starting `round(0.5 fs)` before the cue.
pub fn window_trial(continuous: &Array2<f64>, cue_sample: usize, fs: f64) -> Result<Array2<f64>> {
    let pre = (PRE_CUE_SECONDS * fs).round() as i64;
    let len = window_len(fs) as i64;
    let start = cue_sample as i64 - pre;
    let end = start + len;
    let total = continuous.ncols();
    if start < 0 || end > total as i64 {
        return Err(Error::WindowOutOfBounds {
            start,
            end,
            len: total,
        });
    }
    Ok(continuous
        .slice(ndarray::s![.., start as usize..end as usize])
        .to_owned())
}
