use ndarray::{Array1, ArrayView1};

use crate::error::{Error, Result};

fn check_label(logits: ArrayView1<f64>, label: usize) -> Result<()> {
    if label >= logits.len() {
        return Err(Error::InvalidLabel {
            index: 0,
            label: label as i64,
            n_classes: logits.len(),
        });
    }
    Ok(())
}

/// Softmax with max subtraction.
pub fn softmax(logits: ArrayView1<f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let e = logits.mapv(|v| (v - max).exp());
    let sum = e.sum();
    e / sum
}

/// `-log softmax(logits)[label]`.
pub fn cross_entropy(logits: ArrayView1<f64>, label: usize) -> Result<f64> {
    check_label(logits, label)?;
    let max = logits.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let lse = max + logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    Ok(lse - logits[label])
}

/// Loss and its gradient w.r.t. the logits.
pub fn cross_entropy_grad(logits: ArrayView1<f64>, label: usize) -> Result<(f64, Array1<f64>)> {
    let loss = cross_entropy(logits, label)?;
    let mut grad = softmax(logits);
    grad[label] -= 1.0;
    Ok((loss, grad))
}

/// `|raw - b| + b`.
pub fn flooded_loss(raw: f64, b: f64) -> f64 {
    (raw - b).abs() + b
}

/// Derivative of [`flooded_loss`] w.r.t. `raw`; `+1` at the flood level.
pub fn flood_sign(raw: f64, b: f64) -> f64 {
    if raw >= b {
        1.0
    } else {
        -1.0
    }
}
