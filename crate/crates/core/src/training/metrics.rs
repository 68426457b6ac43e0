use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Classification scores; `confusion[true][predicted]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub macro_precision: f64,
    pub confusion: Vec<Vec<u64>>,
}

impl Metrics {
    /// Scores from a square count matrix. Classes without predictions
    /// contribute precision 0; classes with zero precision and recall
    /// contribute F1 0.
    pub fn from_confusion(confusion: Vec<Vec<u64>>) -> Result<Self> {
        let k = confusion.len();
        if k == 0 || confusion.iter().any(|r| r.len() != k) {
            return Err(Error::Shape("confusion matrix must be square and nonempty".into()));
        }
        let total: u64 = confusion.iter().flatten().sum();
        if total == 0 {
            return Err(Error::Empty("confusion matrix"));
        }
        let trace: u64 = (0..k).map(|i| confusion[i][i]).sum();
        let mut precision_sum = 0.0;
        let mut f1_sum = 0.0;
        for c in 0..k {
            let tp = confusion[c][c] as f64;
            let predicted: u64 = confusion.iter().map(|r| r[c]).sum();
            let actual: u64 = confusion[c].iter().sum();
            let precision = if predicted == 0 { 0.0 } else { tp / predicted as f64 };
            let recall = if actual == 0 { 0.0 } else { tp / actual as f64 };
            precision_sum += precision;
            if precision + recall > 0.0 {
                f1_sum += 2.0 * precision * recall / (precision + recall);
            }
        }
        Ok(Self {
            accuracy: trace as f64 / total as f64,
            macro_f1: f1_sum / k as f64,
            macro_precision: precision_sum / k as f64,
            confusion,
        })
    }

    pub fn from_predictions(labels: &[usize], predictions: &[usize], n_classes: usize) -> Result<Self> {
        if labels.len() != predictions.len() {
            return Err(Error::Shape(format!(
                "{} labels for {} predictions",
                labels.len(),
                predictions.len()
            )));
        }
        let mut confusion = vec![vec![0u64; n_classes]; n_classes];
        for (i, (&y, &p)) in labels.iter().zip(predictions).enumerate() {
            if y >= n_classes || p >= n_classes {
                return Err(Error::InvalidLabel {
                    index: i,
                    label: y.max(p) as i64,
                    n_classes,
                });
            }
            confusion[y][p] += 1;
        }
        Self::from_confusion(confusion)
    }
}

/// Index of the largest entry; the first one on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect() {
        let m = Metrics::from_predictions(&[0, 1, 2, 3, 1], &[0, 1, 2, 3, 1], 4).unwrap();
        assert_eq!((m.accuracy, m.macro_f1, m.macro_precision), (1.0, 1.0, 1.0));
    }

    #[test]
    fn single_class_set() {
        let mut c = vec![vec![0u64; 4]; 4];
        c[0][0] = 10;
        let m = Metrics::from_confusion(c).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.macro_precision, 0.25);
        assert_eq!(m.macro_f1, 0.25);
    }

    #[test]
    fn half_right() {
        let m = Metrics::from_confusion(vec![vec![5, 5], vec![5, 5]]).unwrap();
        assert_eq!((m.accuracy, m.macro_f1, m.macro_precision), (0.5, 0.5, 0.5));
    }

    #[test]
    fn errors() {
        assert!(Metrics::from_confusion(vec![]).is_err());
        assert!(Metrics::from_confusion(vec![vec![0, 0], vec![0, 0]]).is_err());
        assert!(Metrics::from_predictions(&[0], &[4], 4).is_err());
    }

    #[test]
    fn argmax_ties() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
    }
}
