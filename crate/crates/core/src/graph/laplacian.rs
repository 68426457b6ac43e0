//! Normalized Laplacian and the Chebyshev polynomial basis of its scaled form.

use ndarray::Array2;

use super::Adjacency;
use crate::error::{Error, Result};

pub const POWER_ITER_TOL: f64 = 1e-6;
pub const POWER_ITER_MAX: usize = 1000;
/// Upper bound of the normalized Laplacian spectrum, used when power
/// iteration does not converge.
pub const LAMBDA_MAX_FALLBACK: f64 = 2.0;

/// `I - D^{-1/2} A D^{-1/2}`; isolated nodes get a unit diagonal and no
/// off-diagonal entries.
pub fn normalized_laplacian(adj: &Adjacency) -> Array2<f64> {
    let n = adj.n();
    let inv_sqrt: Vec<f64> = adj
        .weights
        .rows()
        .into_iter()
        .map(|r| {
            let d: f64 = r.sum();
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    Array2::from_shape_fn((n, n), |(i, j)| {
        let off = inv_sqrt[i] * adj.weights[[i, j]] * inv_sqrt[j];
        if i == j {
            1.0 - off
        } else {
            -off
        }
    })
}

/// Largest eigenvalue estimate of a symmetric PSD matrix, and whether power
/// iteration converged (residual `||Lv - lambda v|| < tol`).
pub fn largest_eigenvalue(mat: &Array2<f64>, tol: f64, max_iter: usize) -> (f64, bool) {
    let n = mat.nrows();
    // irrational-step start vector: not orthogonal to structured eigenvectors
    let mut v: Vec<f64> = (0..n)
        .map(|i| 1.0 + ((i + 1) as f64 * 0.754_877_666_246_692_8).fract())
        .collect();
    normalize(&mut v);
    let mut w = vec![0.0; n];
    for _ in 0..max_iter {
        for (i, wi) in w.iter_mut().enumerate() {
            *wi = mat.row(i).iter().zip(&v).map(|(a, b)| a * b).sum();
        }
        let lambda: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
        let residual = w
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - lambda * b).powi(2))
            .sum::<f64>()
            .sqrt();
        if residual < tol {
            return (lambda, true);
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return (0.0, true);
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / norm;
        }
    }
    (LAMBDA_MAX_FALLBACK, false)
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
}

fn max_asymmetry(m: &Array2<f64>) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            worst = worst.max((m[[i, j]] - m[[j, i]]).abs());
        }
    }
    worst
}

/// `T_0 .. T_{K-1}` evaluated at `2 L / lambda_max - I`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebBasis {
    pub terms: Vec<Array2<f64>>,
    pub lambda_max: f64,
}

impl ChebBasis {
    pub fn order(&self) -> usize {
        self.terms.len()
    }

    pub fn n(&self) -> usize {
        self.terms[0].nrows()
    }

    /// Simultaneous row/column permutation: node `i` of the result is node
    /// `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> ChebBasis {
        let n = self.n();
        ChebBasis {
            terms: self
                .terms
                .iter()
                .map(|t| Array2::from_shape_fn((n, n), |(i, j)| t[[perm[i], perm[j]]]))
                .collect(),
            lambda_max: self.lambda_max,
        }
    }
}

/// Scaled Laplacian `2 L / lambda_max - I`.
pub fn scaled_laplacian(laplacian: &Array2<f64>, lambda_max: f64) -> Array2<f64> {
    let n = laplacian.nrows();
    let mut out = laplacian * (2.0 / lambda_max);
    for i in 0..n {
        out[[i, i]] -= 1.0;
    }
    out
}

pub fn chebyshev_basis(laplacian: &Array2<f64>, order: usize) -> Result<ChebBasis> {
    if order == 0 {
        return Err(Error::InvalidArgument("Chebyshev order must be >= 1".into()));
    }
    let (n, m) = laplacian.dim();
    if n != m || n == 0 {
        return Err(Error::Shape(format!("Laplacian must be square, got {n}x{m}")));
    }
    let asym = max_asymmetry(laplacian);
    if asym > 1e-10 {
        return Err(Error::NotSymmetric(asym));
    }
    let (mut lambda_max, _) = largest_eigenvalue(laplacian, POWER_ITER_TOL, POWER_ITER_MAX);
    if !(lambda_max > 0.0) {
        lambda_max = LAMBDA_MAX_FALLBACK;
    }
    let scaled = scaled_laplacian(laplacian, lambda_max);
    let mut terms = vec![Array2::eye(n)];
    if order >= 2 {
        terms.push(scaled.clone());
    }
    for p in 2..order {
        let next = scaled.dot(&terms[p - 1]) * 2.0 - &terms[p - 2];
        terms.push(next);
    }
    Ok(ChebBasis { terms, lambda_max })
}

/// Laplacian plus basis in one step.
pub fn basis_for(adj: &Adjacency, order: usize) -> Result<ChebBasis> {
    chebyshev_basis(&normalized_laplacian(adj), order)
}
