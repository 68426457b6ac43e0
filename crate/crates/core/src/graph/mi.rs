//! Plug-in (histogram) entropy and mutual information, in bits.

use ndarray::{Array2, ArrayView1, ArrayView2};

use super::{Adjacency, AdjacencyKind};
use crate::error::{Error, Result};

/// Default histogram resolution for channel MI.
pub const DEFAULT_BINS: usize = 16;

/// Equal-width bin index of every value over `[min, max]`. A constant
/// vector falls entirely into bin 0.
pub fn bin_indices(x: ArrayView1<f64>, bins: usize) -> Vec<usize> {
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let range = hi - lo;
    if !(range > 0.0) {
        return vec![0; x.len()];
    }
    let scale = bins as f64 / range;
    x.iter()
        .map(|&v| (((v - lo) * scale) as usize).min(bins - 1))
        .collect()
}

fn entropy_from_counts(counts: &[u32], total: usize) -> f64 {
    let n = total as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

fn marginal_entropy(idx: &[usize], bins: usize) -> f64 {
    let mut counts = vec![0u32; bins];
    for &i in idx {
        counts[i] += 1;
    }
    entropy_from_counts(&counts, idx.len())
}

fn joint_entropy(a: &[usize], b: &[usize], bins: usize, scratch: &mut Vec<u32>) -> f64 {
    scratch.clear();
    scratch.resize(bins * bins, 0);
    for (&i, &j) in a.iter().zip(b) {
        scratch[i * bins + j] += 1;
    }
    entropy_from_counts(scratch, a.len())
}

fn check_bins(bins: usize) -> Result<()> {
    if bins < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 bins, got {bins}")));
    }
    Ok(())
}

/// `-sum p log2 p` over `bins` equal-width bins spanning the data range.
pub fn histogram_entropy(x: ArrayView1<f64>, bins: usize) -> Result<f64> {
    check_bins(bins)?;
    if x.is_empty() {
        return Err(Error::Empty("entropy input"));
    }
    Ok(marginal_entropy(&bin_indices(x, bins), bins))
}

/// `H(X) + H(Y) - H(X,Y)` on a `bins x bins` joint histogram, clamped at 0.
pub fn mutual_information(x: ArrayView1<f64>, y: ArrayView1<f64>, bins: usize) -> Result<f64> {
    check_bins(bins)?;
    if x.len() != y.len() {
        return Err(Error::Shape(format!(
            "mutual information of {} vs {} samples",
            x.len(),
            y.len()
        )));
    }
    if x.is_empty() {
        return Err(Error::Empty("mutual information input"));
    }
    let (bx, by) = (bin_indices(x, bins), bin_indices(y, bins));
    let mut scratch = Vec::new();
    Ok(mi_from_bins(&bx, &by, bins, &mut scratch))
}

fn mi_from_bins(bx: &[usize], by: &[usize], bins: usize, scratch: &mut Vec<u32>) -> f64 {
    let hx = marginal_entropy(bx, bins);
    let hy = marginal_entropy(by, bins);
    let hxy = joint_entropy(bx, by, bins, scratch);
    (hx + hy - hxy).max(0.0)
}

/// Mean pairwise channel MI over a list of `channels x samples` matrices
/// (band-passed trials or flattened node features). Diagonal is zero.
pub fn mi_adjacency(series: &[ArrayView2<f64>], bins: usize) -> Result<Adjacency> {
    check_bins(bins)?;
    let first = series.first().ok_or(Error::Empty("mutual information trials"))?;
    let n = first.nrows();
    if n < 2 {
        return Err(Error::InvalidArgument("mutual information graph needs >= 2 nodes".into()));
    }
    let mut sum = Array2::<f64>::zeros((n, n));
    let mut scratch = Vec::new();
    for (index, trial) in series.iter().enumerate() {
        if trial.nrows() != n || trial.ncols() == 0 {
            return Err(Error::DimensionMismatch {
                index,
                detail: format!("{:?} rows/cols, expected {n} non-empty rows", trial.dim()),
            });
        }
        let binned: Vec<Vec<usize>> = trial.rows().into_iter().map(|r| bin_indices(r, bins)).collect();
        for i in 0..n {
            for j in i + 1..n {
                sum[[i, j]] += mi_from_bins(&binned[i], &binned[j], bins, &mut scratch);
            }
        }
    }
    let count = series.len() as f64;
    let mut weights = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            let w = sum[[i, j]] / count;
            weights[[i, j]] = w;
            weights[[j, i]] = w;
        }
    }
    Adjacency::new(weights, AdjacencyKind::Mi)
}
