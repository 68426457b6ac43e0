//! Per-trial feature extraction: band DE and PSD, asymmetry families,
//! double folding, and train-fold standard scaling.

mod asym;
mod io;
mod scale;
mod spectral;

use std::fmt;
use std::str::FromStr;

use ndarray::{concatenate, Array3, ArrayView3, Axis};
use serde::{Deserialize, Serialize};

pub use asym::{asym_features, scatter_to_nodes, MontagePairs};
pub use io::{load_features, save_features, FeatureItem, FeatureManifest};
pub use scale::{standard_scale, ScalerState};
pub use spectral::{differential_entropy, entropy_of_variance, equal_bands, BandPower};

use crate::error::{Error, Result};
use crate::ingest::{Trial, TrialSet};

/// Floor for variances and ratio denominators.
pub const EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum FeatureKind {
    De,
    Psd,
    Dasm,
    Rasm,
    Asm,
    Dcau,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 6] = [
        FeatureKind::De,
        FeatureKind::Psd,
        FeatureKind::Dasm,
        FeatureKind::Rasm,
        FeatureKind::Asm,
        FeatureKind::Dcau,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::De => "DE",
            FeatureKind::Psd => "PSD",
            FeatureKind::Dasm => "DASM",
            FeatureKind::Rasm => "RASM",
            FeatureKind::Asm => "ASM",
            FeatureKind::Dcau => "DCAU",
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or(Error::Unknown {
                what: "feature kind",
                value: s.to_string(),
            })
    }
}

/// `nodes x feature channels x time segments`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    pub values: Array3<f64>,
    pub kind: FeatureKind,
}

impl FeatureTensor {
    pub fn n_nodes(&self) -> usize {
        self.values.dim().0
    }

    pub fn n_features(&self) -> usize {
        self.values.dim().1
    }

    pub fn n_segments(&self) -> usize {
        self.values.dim().2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub bands: Vec<(f64, f64)>,
    /// Segment length in seconds.
    pub seg_len: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            bands: equal_bands(4.0, 40.0, 11),
            seg_len: 0.5,
        }
    }
}

impl FeatureConfig {
    pub fn seg_samples(&self, fs: f64) -> Result<usize> {
        let n = self.seg_len * fs;
        if !(n >= 2.0) || (n - n.round()).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "segment length {} s is not a whole number (>= 2) of samples at {fs} Hz",
                self.seg_len
            )));
        }
        Ok(n.round() as usize)
    }

    pub fn band_power(&self, fs: f64) -> Result<BandPower> {
        BandPower::new(fs, self.seg_samples(fs)?, &self.bands)
    }
}

/// Per-segment band DE, `channels x bands x segments`, before folding.
pub fn band_de_features(trial: &Trial, fs: f64, config: &FeatureConfig) -> Result<FeatureTensor> {
    let powers = config.band_power(fs)?.trial_powers(trial.samples.view())?;
    Ok(FeatureTensor {
        values: powers.mapv(entropy_of_variance),
        kind: FeatureKind::De,
    })
}

/// Per-segment band power, `channels x bands x segments`.
pub fn psd_features(trial: &Trial, fs: f64, config: &FeatureConfig) -> Result<FeatureTensor> {
    Ok(FeatureTensor {
        values: config.band_power(fs)?.trial_powers(trial.samples.view())?,
        kind: FeatureKind::Psd,
    })
}

/// Stacks the feature axis onto itself: `N x F x T -> N x 2F x T`.
/// `arity` is the expected input feature count.
pub fn double_fold(values: ArrayView3<f64>, arity: usize) -> Result<Array3<f64>> {
    let f = values.dim().1;
    if f != arity || f == 0 {
        return Err(Error::Shape(format!(
            "double fold expects {arity} feature channels, got {f}"
        )));
    }
    Ok(concatenate(Axis(1), &[values, values]).expect("identical shapes"))
}

/// Builds network-ready node features of `kind` for one trial.
///
/// DE, PSD, DASM, RASM and DCAU are double folded; ASM already has twice
/// the band count. Asymmetry families are scattered back onto the nodes
/// with [`scatter_to_nodes`], so every kind yields `N x 2B x T`.
pub struct FeatureExtractor {
    band_power: BandPower,
    kind: FeatureKind,
    pairs: Option<MontagePairs>,
}

impl FeatureExtractor {
    pub fn new(
        fs: f64,
        config: &FeatureConfig,
        kind: FeatureKind,
        pairs: Option<MontagePairs>,
    ) -> Result<Self> {
        let needs_pairs = !matches!(kind, FeatureKind::De | FeatureKind::Psd);
        if needs_pairs && pairs.is_none() {
            return Err(Error::InvalidArgument(format!(
                "{kind} features need montage pairs"
            )));
        }
        Ok(Self {
            band_power: config.band_power(fs)?,
            kind,
            pairs,
        })
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn extract(&self, trial: &Trial) -> Result<FeatureTensor> {
        let n_nodes = trial.samples.nrows();
        let powers = self.band_power.trial_powers(trial.samples.view())?;
        let bands = self.band_power.n_bands();
        let values = match self.kind {
            FeatureKind::Psd => double_fold(powers.view(), bands)?,
            FeatureKind::De => double_fold(powers.mapv(entropy_of_variance).view(), bands)?,
            kind => {
                let pairs = self.pairs.as_ref().expect("checked in new");
                let de = powers.mapv(entropy_of_variance);
                let per_pair = asym_features(de.view(), pairs, kind)?;
                let list = pairs.pairs_for(kind).expect("asymmetry kind");
                let nodes = scatter_to_nodes(per_pair.view(), list, n_nodes);
                if kind == FeatureKind::Asm {
                    nodes
                } else {
                    double_fold(nodes.view(), bands)?
                }
            }
        };
        Ok(FeatureTensor {
            values,
            kind: self.kind,
        })
    }

    pub fn extract_set(&self, set: &TrialSet) -> Result<Vec<FeatureTensor>> {
        set.trials.iter().map(|t| self.extract(t)).collect()
    }
}
