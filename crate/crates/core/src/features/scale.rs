use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::{FeatureTensor, EPS};
use crate::error::{Error, Result};

/// Per `(node, feature)` affine map fitted on a training fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerState {
    pub mean: Array2<f64>,
    pub std: Array2<f64>,
}

impl ScalerState {
    /// Mean and population standard deviation of each `(node, feature)`
    /// cell, pooled over trials and time segments. Cells whose variance is
    /// at or below the floor map to the identity.
    pub fn fit(tensors: &[FeatureTensor]) -> Result<Self> {
        let first = tensors.first().ok_or(Error::Empty("scaler training set"))?;
        let (n, f, _) = first.values.dim();
        let mut sum = Array2::<f64>::zeros((n, f));
        let mut count = 0usize;
        for t in tensors {
            let (tn, tf, tt) = t.values.dim();
            if (tn, tf) != (n, f) {
                return Err(Error::Shape(format!(
                    "scaler expects {n}x{f} cells, got {tn}x{tf}"
                )));
            }
            sum += &t.values.sum_axis(Axis(2));
            count += tt;
        }
        if count == 0 {
            return Err(Error::Empty("time segments"));
        }
        let mean = sum / count as f64;
        let mut sq = Array2::<f64>::zeros((n, f));
        for t in tensors {
            for ((i, j, _), v) in t.values.indexed_iter() {
                sq[[i, j]] += (v - mean[[i, j]]).powi(2);
            }
        }
        let var = sq / count as f64;
        let mut state = ScalerState {
            mean,
            std: var.mapv(f64::sqrt),
        };
        for ((m, s), v) in state
            .mean
            .iter_mut()
            .zip(state.std.iter_mut())
            .zip(var.iter())
        {
            if *v <= EPS {
                *m = 0.0;
                *s = 1.0;
            }
        }
        Ok(state)
    }

    pub fn transform(&self, tensor: &FeatureTensor) -> Result<FeatureTensor> {
        let (n, f, t) = tensor.values.dim();
        if (n, f) != self.mean.dim() {
            return Err(Error::Shape(format!(
                "scaler fitted on {:?} cells, got {n}x{f}",
                self.mean.dim()
            )));
        }
        let mut values = tensor.values.clone();
        for i in 0..n {
            for j in 0..f {
                let (m, s) = (self.mean[[i, j]], self.std[[i, j]]);
                for k in 0..t {
                    values[[i, j, k]] = (values[[i, j, k]] - m) / s;
                }
            }
        }
        Ok(FeatureTensor {
            values,
            kind: tensor.kind,
        })
    }

    pub fn transform_all(&self, tensors: &[FeatureTensor]) -> Result<Vec<FeatureTensor>> {
        tensors.iter().map(|t| self.transform(t)).collect()
    }
}

/// Fits on `train` and returns the scaled training tensors with the state.
pub fn standard_scale(train: &[FeatureTensor]) -> Result<(Vec<FeatureTensor>, ScalerState)> {
    let state = ScalerState::fit(train)?;
    Ok((state.transform_all(train)?, state))
}
