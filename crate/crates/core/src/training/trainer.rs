use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::loss::{cross_entropy_grad, flood_sign, flooded_loss};
use super::metrics::{argmax, Metrics};
use super::optim::{adam_step, AdamState};
use crate::error::{Error, Result};
use crate::features::FeatureTensor;
use crate::graph::ChebBasis;
use crate::model::{backward, forward, Dropout, Hyper, ModelParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub flood_level: f64,
    pub dropout: f64,
    pub folds: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 7.6e-4,
            batch_size: 32,
            epochs: 500,
            flood_level: 0.5,
            dropout: 0.5,
            folds: 4,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.learning_rate > 0.0) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return bad("batch_size and epochs must be positive".into());
        }
        if !(self.flood_level >= 0.0) {
            return bad(format!("flood_level must be nonnegative, got {}", self.flood_level));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        if self.folds < 2 {
            return bad(format!("folds must be >= 2, got {}", self.folds));
        }
        Ok(())
    }
}

/// Features with their labels.
#[derive(Debug, Clone, Copy)]
pub struct Labeled<'a> {
    pub features: &'a [FeatureTensor],
    pub labels: &'a [usize],
}

impl<'a> Labeled<'a> {
    pub fn new(features: &'a [FeatureTensor], labels: &'a [usize]) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} feature tensors for {} labels",
                features.len(),
                labels.len()
            )));
        }
        Ok(Self { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub raw_loss: f64,
    pub flooded_loss: f64,
    pub train_accuracy: f64,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// Epoch (1-based) with the highest validation accuracy, first on ties.
    pub best_epoch: Option<usize>,
    /// `(epoch, sha256 of the parameters)` every [`DIGEST_EVERY`] epochs.
    pub param_digests: Vec<(usize, String)>,
}

pub const DIGEST_EVERY: usize = 100;

impl History {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn best_train_accuracy(&self) -> f64 {
        self.epochs.iter().map(|e| e.train_accuracy).fold(0.0, f64::max)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for e in &self.epochs {
            w.serialize(e)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Hex sha256 over the little-endian parameter bytes.
pub fn param_digest(params: &ModelParams) -> String {
    let mut h = Sha256::new();
    for t in params.tensors() {
        for v in t {
            h.update(v.to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed derived from a run seed and a path of indices.
fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix(seed), |acc, &p| mix(acc ^ mix(p)))
}

pub fn predict(params: &ModelParams, hyper: &Hyper, basis: &ChebBasis, features: &[FeatureTensor]) -> Result<Vec<usize>> {
    features
        .iter()
        .map(|f| {
            let out = forward(f.values.view(), params, hyper, basis, Dropout::Off)?;
            Ok(argmax(out.logits.as_slice().expect("contiguous logits")))
        })
        .collect()
}

pub fn evaluate(params: &ModelParams, hyper: &Hyper, basis: &ChebBasis, data: Labeled<'_>) -> Result<Metrics> {
    if data.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    let predictions = predict(params, hyper, basis, data.features)?;
    Metrics::from_predictions(data.labels, &predictions, hyper.n_classes)
}

pub struct TrainOutcome {
    pub params: ModelParams,
    pub history: History,
}

/// Full training run of `config.epochs` epochs.
pub fn train_fold(
    train: Labeled<'_>,
    val: Option<Labeled<'_>>,
    hyper: &Hyper,
    basis: &ChebBasis,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    train_fold_with(train, val, hyper, basis, config, |_| true)
}

/// As [`train_fold`]; `keep_going` sees each finished epoch and may stop
/// the run by returning `false`.
pub fn train_fold_with(
    train: Labeled<'_>,
    val: Option<Labeled<'_>>,
    hyper: &Hyper,
    basis: &ChebBasis,
    config: &TrainConfig,
    mut keep_going: impl FnMut(&EpochRecord) -> bool,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training split"));
    }
    if val.is_some_and(|v| v.is_empty()) {
        return Err(Error::Empty("validation split"));
    }
    let hyper = Hyper {
        dropout: config.dropout,
        ..hyper.clone()
    };
    let mut params = ModelParams::init(&hyper, config.seed)?;
    let mut adam = AdamState::new(&params);
    let mut history = History::default();
    let mut best_val = f64::NEG_INFINITY;
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 0..config.epochs {
        order.sort_unstable();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[epoch as u64])));
        let mut raw_total = 0.0;
        let mut flooded_total = 0.0;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let mut grad_sum = params.zeros_like();
            let mut raw_sum = 0.0;
            for (j, &i) in batch.iter().enumerate() {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                    config.seed,
                    &[epoch as u64, b as u64, j as u64],
                ));
                let out = forward(
                    train.features[i].values.view(),
                    &params,
                    &hyper,
                    basis,
                    Dropout::Sample(&mut rng),
                )?;
                let (loss, dlogits) = cross_entropy_grad(out.logits.view(), train.labels[i])?;
                let grads = backward(out.cache.as_ref(), &params, &hyper, basis, &dlogits)?;
                grad_sum.add_scaled(&grads, 1.0)?;
                raw_sum += loss;
            }
            let size = batch.len() as f64;
            let raw = raw_sum / size;
            grad_sum.scale(flood_sign(raw, config.flood_level) / size);
            adam_step(&mut params, &grad_sum, &mut adam, config.learning_rate)?;
            raw_total += raw * size;
            flooded_total += flooded_loss(raw, config.flood_level) * size;
        }
        if !params.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "parameters diverged in epoch {}",
                epoch + 1
            )));
        }
        let train_accuracy = evaluate(&params, &hyper, basis, train)?.accuracy;
        let val_accuracy = match val {
            Some(v) => Some(evaluate(&params, &hyper, basis, v)?.accuracy),
            None => None,
        };
        if let Some(acc) = val_accuracy {
            if acc > best_val {
                best_val = acc;
                history.best_epoch = Some(epoch + 1);
            }
        }
        let n = train.len() as f64;
        let record = EpochRecord {
            epoch: epoch + 1,
            raw_loss: raw_total / n,
            flooded_loss: flooded_total / n,
            train_accuracy,
            val_accuracy,
        };
        if (epoch + 1) % DIGEST_EVERY == 0 {
            history.param_digests.push((epoch + 1, param_digest(&params)));
        }
        let go_on = keep_going(&record);
        history.epochs.push(record);
        if !go_on {
            break;
        }
    }
    Ok(TrainOutcome { params, history })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_are_spread() {
        let a = derive_seed(1, &[0, 0, 0]);
        let b = derive_seed(1, &[0, 0, 1]);
        let c = derive_seed(1, &[0, 1, 0]);
        let d = derive_seed(2, &[0, 0, 0]);
        assert!(a != b && a != c && a != d && b != c);
    }

    #[test]
    fn config_validation() {
        TrainConfig::default().validate().unwrap();
        let c = TrainConfig { folds: 1, ..TrainConfig::default() };
        assert!(c.validate().is_err());
        let c = TrainConfig { learning_rate: 0.0, ..TrainConfig::default() };
        assert!(c.validate().is_err());
    }
}
