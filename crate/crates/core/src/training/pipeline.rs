//! End-to-end cross-validation: filtering, features, per-fold scaling and
//! graph construction, training and scoring.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::split::kfold_split;
use super::trainer::{evaluate, train_fold, History, Labeled, TrainConfig};
use super::metrics::Metrics;
use crate::error::{Error, Result};
use crate::features::{FeatureConfig, FeatureExtractor, FeatureKind, FeatureTensor, MontagePairs, ScalerState};
use crate::graph::{
    basis_for, euclidean_adjacency, knn_adjacency, masked_mi, mi_adjacency, node_mean_features,
    random_adjacency, Adjacency, AdjacencyKind, ChebBasis, Montage2D, DEFAULT_BINS,
};
use crate::ingest::{bandpass_set, window_trial, Trial, TrialSet};
use crate::model::{Hyper, ModelParams};

/// Input of the mutual-information graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MiSource {
    /// Band-passed time series, `channels x samples` per trial.
    Signal,
    /// Scaled node features flattened to `nodes x (features * segments)`.
    Features,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub feature_kind: FeatureKind,
    pub adjacency_kind: AdjacencyKind,
    pub filter_lo: f64,
    pub filter_hi: f64,
    /// Cue position in each stored trial; `None` means trials are already
    /// cue-aligned windows.
    pub cue_sample: Option<usize>,
    pub features: FeatureConfig,
    pub mi_bins: usize,
    pub mi_source: MiSource,
    pub knn_k: usize,
    pub random_density: f64,
    pub hyper: Hyper,
    pub train: TrainConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            feature_kind: FeatureKind::De,
            adjacency_kind: AdjacencyKind::Mi,
            filter_lo: 4.0,
            filter_hi: 40.0,
            cue_sample: None,
            features: FeatureConfig::default(),
            mi_bins: DEFAULT_BINS,
            mi_source: MiSource::Signal,
            knn_k: 4,
            random_density: 0.3,
            hyper: Hyper::default(),
            train: TrainConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.hyper.validate()?;
        self.train.validate()?;
        if self.mi_bins < 2 {
            return Err(Error::InvalidArgument(format!("mi_bins must be >= 2, got {}", self.mi_bins)));
        }
        if self.knn_k == 0 {
            return Err(Error::InvalidArgument("knn_k must be positive".into()));
        }
        Ok(())
    }

    /// Hyperparameters with the dropout rate of the training config.
    pub fn model_hyper(&self) -> Hyper {
        Hyper {
            dropout: self.train.dropout,
            ..self.hyper.clone()
        }
    }
}

/// Filtered signals and unscaled features of every trial.
pub struct Prepared {
    pub signals: TrialSet,
    pub features: Vec<FeatureTensor>,
    pub labels: Vec<usize>,
}

pub fn prepare(set: &TrialSet, cfg: &PipelineConfig) -> Result<Prepared> {
    if set.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let windowed = match cfg.cue_sample {
        None => set.clone(),
        Some(cue) => TrialSet {
            trials: set
                .trials
                .iter()
                .map(|t| {
                    Ok(Trial {
                        samples: window_trial(&t.samples, cue, set.fs)?,
                        label: t.label,
                        subject_id: t.subject_id,
                    })
                })
                .collect::<Result<_>>()?,
            ..set.clone()
        },
    };
    let signals = bandpass_set(&windowed, cfg.filter_lo, cfg.filter_hi)?;
    let pairs = match cfg.feature_kind {
        FeatureKind::De | FeatureKind::Psd => None,
        _ => Some(MontagePairs::from_channel_names(&set.channel_names)?),
    };
    let extractor = FeatureExtractor::new(set.fs, &cfg.features, cfg.feature_kind, pairs)?;
    let features = extractor.extract_set(&signals)?;
    let labels = signals.labels();
    Ok(Prepared {
        signals,
        features,
        labels,
    })
}

fn flatten_nodes(t: &FeatureTensor) -> Array2<f64> {
    let (n, f, s) = t.values.dim();
    t.values
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((n, f * s))
        .expect("contiguous")
}

/// Graph of `kind` built only from the trials in `train`.
pub fn build_adjacency(
    kind: AdjacencyKind,
    prepared: &Prepared,
    scaled_train: &[FeatureTensor],
    train: &[usize],
    cfg: &PipelineConfig,
) -> Result<Adjacency> {
    let mi = || -> Result<Adjacency> {
        match cfg.mi_source {
            MiSource::Signal => {
                let views: Vec<ArrayView2<f64>> = train
                    .iter()
                    .map(|&i| prepared.signals.trials[i].samples.view())
                    .collect();
                mi_adjacency(&views, cfg.mi_bins)
            }
            MiSource::Features => {
                let flat: Vec<Array2<f64>> = scaled_train.iter().map(flatten_nodes).collect();
                let views: Vec<ArrayView2<f64>> = flat.iter().map(|a| a.view()).collect();
                mi_adjacency(&views, cfg.mi_bins)
            }
        }
    };
    let knn = || -> Result<Adjacency> {
        let points = node_mean_features(scaled_train)?;
        knn_adjacency(points.view(), cfg.knn_k)
    };
    let ed = || -> Result<Adjacency> {
        euclidean_adjacency(&Montage2D::for_channels(&prepared.signals.channel_names)?, cfg.knn_k)
    };
    match kind {
        AdjacencyKind::Mi => mi(),
        AdjacencyKind::Knn => knn(),
        AdjacencyKind::Ed => ed(),
        AdjacencyKind::Random => random_adjacency(
            prepared.signals.n_channels(),
            cfg.train.seed,
            cfg.random_density,
        ),
        AdjacencyKind::MulKnn => masked_mi(&knn()?, &mi()?),
        AdjacencyKind::MulEd => masked_mi(&ed()?, &mi()?),
    }
}

/// Everything fitted on one training split.
pub struct FittedGraph {
    pub scaler: ScalerState,
    pub adjacency: Adjacency,
    pub basis: ChebBasis,
    pub scaled: Vec<FeatureTensor>,
}

/// Fits the scaler on `train` only, scales every trial and builds the graph.
pub fn fit_split(prepared: &Prepared, train: &[usize], cfg: &PipelineConfig) -> Result<FittedGraph> {
    let train_feats: Vec<FeatureTensor> = train.iter().map(|&i| prepared.features[i].clone()).collect();
    let scaler = ScalerState::fit(&train_feats)?;
    let scaled = scaler.transform_all(&prepared.features)?;
    let scaled_train: Vec<FeatureTensor> = train.iter().map(|&i| scaled[i].clone()).collect();
    let adjacency = build_adjacency(cfg.adjacency_kind, prepared, &scaled_train, train, cfg)?;
    let basis = basis_for(&adjacency, cfg.hyper.cheb_order)?;
    Ok(FittedGraph {
        scaler,
        adjacency,
        basis,
        scaled,
    })
}

fn gather<T: Clone>(items: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| items[i].clone()).collect()
}

pub struct FoldResult {
    pub fold: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub train: Metrics,
    pub val: Metrics,
    pub history: History,
    pub params: ModelParams,
    pub scaler: ScalerState,
    pub adjacency: Adjacency,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanMetrics {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub macro_precision: f64,
}

impl MeanMetrics {
    pub fn of(metrics: &[&Metrics]) -> Self {
        let k = metrics.len() as f64;
        Self {
            accuracy: metrics.iter().map(|m| m.accuracy).sum::<f64>() / k,
            macro_f1: metrics.iter().map(|m| m.macro_f1).sum::<f64>() / k,
            macro_precision: metrics.iter().map(|m| m.macro_precision).sum::<f64>() / k,
        }
    }
}

pub struct CvReport {
    pub folds: Vec<FoldResult>,
    pub mean_val: MeanMetrics,
}

/// K-fold cross-validation; folds run in order and share nothing.
pub fn run_cv(set: &TrialSet, cfg: &PipelineConfig) -> Result<CvReport> {
    cfg.validate()?;
    check_model_fit(set, cfg)?;
    let prepared = prepare(set, cfg)?;
    let hyper = cfg.model_hyper();
    let splits = kfold_split(set.len(), cfg.train.folds, cfg.train.seed)?;
    let mut folds = Vec::with_capacity(splits.len());
    for (k, split) in splits.iter().enumerate() {
        let fitted = fit_split(&prepared, &split.train, cfg)?;
        let train_x = gather(&fitted.scaled, &split.train);
        let train_y = gather(&prepared.labels, &split.train);
        let val_x = gather(&fitted.scaled, &split.val);
        let val_y = gather(&prepared.labels, &split.val);
        let train = Labeled::new(&train_x, &train_y)?;
        let val = Labeled::new(&val_x, &val_y)?;
        let outcome = train_fold(train, Some(val), &hyper, &fitted.basis, &cfg.train)?;
        folds.push(FoldResult {
            fold: k,
            n_train: train.len(),
            n_val: val.len(),
            train: evaluate(&outcome.params, &hyper, &fitted.basis, train)?,
            val: evaluate(&outcome.params, &hyper, &fitted.basis, val)?,
            history: outcome.history,
            params: outcome.params,
            scaler: fitted.scaler,
            adjacency: fitted.adjacency,
        });
    }
    let mean_val = MeanMetrics::of(&folds.iter().map(|f| &f.val).collect::<Vec<_>>());
    Ok(CvReport { folds, mean_val })
}

/// Checks that the dataset matches the model's node, segment, feature and
/// class counts.
pub fn check_model_fit(set: &TrialSet, cfg: &PipelineConfig) -> Result<()> {
    let h = &cfg.hyper;
    let samples = match cfg.cue_sample {
        Some(_) => crate::ingest::window_len(set.fs),
        None => set.n_samples().ok_or(Error::Empty("dataset"))?,
    };
    let seg = cfg.features.seg_samples(set.fs)?;
    let segments = samples / seg;
    let feats = 2 * cfg.features.bands.len();
    let mut problems = Vec::new();
    if set.n_channels() != h.n_nodes {
        problems.push(format!("{} channels vs n_nodes {}", set.n_channels(), h.n_nodes));
    }
    if segments != h.n_segments {
        problems.push(format!("{segments} segments vs n_segments {}", h.n_segments));
    }
    if feats != h.in_channels {
        problems.push(format!("{feats} features vs in_channels {}", h.in_channels));
    }
    if set.n_classes() != h.n_classes {
        problems.push(format!("{} classes vs n_classes {}", set.n_classes(), h.n_classes));
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "dataset does not fit the model: {}",
            problems.join("; ")
        )))
    }
}
