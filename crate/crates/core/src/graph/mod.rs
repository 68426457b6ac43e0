//! Electrode graphs: mutual-information weights, ablation variants,
//! normalized Laplacian and Chebyshev basis.

mod laplacian;
mod mi;
mod montage;
mod variants;

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

pub use laplacian::{
    basis_for, chebyshev_basis, largest_eigenvalue, normalized_laplacian, scaled_laplacian,
    ChebBasis, LAMBDA_MAX_FALLBACK, POWER_ITER_MAX, POWER_ITER_TOL,
};
pub use mi::{bin_indices, histogram_entropy, mi_adjacency, mutual_information, DEFAULT_BINS};
pub use montage::Montage2D;
pub use variants::{
    euclidean_adjacency, knn_adjacency, masked_mi, node_mean_features, random_adjacency,
};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AdjacencyKind {
    #[serde(rename = "MI")]
    Mi,
    #[serde(rename = "KNN")]
    Knn,
    #[serde(rename = "ED")]
    Ed,
    #[serde(rename = "RANDOM")]
    Random,
    #[serde(rename = "MUL_KNN")]
    MulKnn,
    #[serde(rename = "MUL_ED")]
    MulEd,
}

impl AdjacencyKind {
    pub const ALL: [AdjacencyKind; 6] = [
        AdjacencyKind::Mi,
        AdjacencyKind::Knn,
        AdjacencyKind::Ed,
        AdjacencyKind::Random,
        AdjacencyKind::MulKnn,
        AdjacencyKind::MulEd,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AdjacencyKind::Mi => "MI",
            AdjacencyKind::Knn => "KNN",
            AdjacencyKind::Ed => "ED",
            AdjacencyKind::Random => "RANDOM",
            AdjacencyKind::MulKnn => "MUL_KNN",
            AdjacencyKind::MulEd => "MUL_ED",
        }
    }
}

impl fmt::Display for AdjacencyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AdjacencyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AdjacencyKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or(Error::Unknown {
                what: "adjacency kind",
                value: s.to_string(),
            })
    }
}

/// Symmetric, nonnegative, zero-diagonal weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Adjacency {
    pub weights: Array2<f64>,
    pub kind: AdjacencyKind,
}

#[derive(Serialize, Deserialize)]
struct AdjacencyJson {
    n: usize,
    kind: AdjacencyKind,
    weights: Vec<f64>,
}

impl Adjacency {
    pub fn new(weights: Array2<f64>, kind: AdjacencyKind) -> Result<Self> {
        let (n, m) = weights.dim();
        if n != m {
            return Err(Error::Shape(format!("adjacency must be square, got {n}x{m}")));
        }
        for i in 0..n {
            if weights[[i, i]] != 0.0 {
                return Err(Error::InvalidArgument(format!("adjacency diagonal {i} is nonzero")));
            }
            for j in 0..n {
                let w = weights[[i, j]];
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "adjacency weight ({i}, {j}) = {w} is not a finite nonnegative value"
                    )));
                }
                let d = (w - weights[[j, i]]).abs();
                if d > 1e-12 {
                    return Err(Error::NotSymmetric(d));
                }
            }
        }
        Ok(Self { weights, kind })
    }

    pub fn n(&self) -> usize {
        self.weights.nrows()
    }

    /// Fraction of off-diagonal entries that are nonzero.
    pub fn density(&self) -> f64 {
        let n = self.n();
        if n < 2 {
            return 0.0;
        }
        let nnz = self.weights.iter().filter(|&&w| w != 0.0).count();
        nnz as f64 / (n * (n - 1)) as f64
    }

    /// Smallest and largest off-diagonal weight.
    pub fn weight_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for ((i, j), &w) in self.weights.indexed_iter() {
            if i != j {
                lo = lo.min(w);
                hi = hi.max(w);
            }
        }
        (lo, hi)
    }

    /// Row and column permutation: node `i` of the result is node `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Adjacency {
        let n = self.n();
        Adjacency {
            weights: Array2::from_shape_fn((n, n), |(i, j)| self.weights[[perm[i], perm[j]]]),
            kind: self.kind,
        }
    }

    pub fn to_json(&self) -> String {
        let doc = AdjacencyJson {
            n: self.n(),
            kind: self.kind,
            weights: self.weights.iter().copied().collect(),
        };
        serde_json::to_string_pretty(&doc).expect("adjacency serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: AdjacencyJson = serde_json::from_str(text)
            .map_err(|e| Error::json("<adjacency>", e))?;
        if doc.weights.len() != doc.n * doc.n {
            return Err(Error::Shape(format!(
                "adjacency declares n={} but holds {} weights",
                doc.n,
                doc.weights.len()
            )));
        }
        let weights = Array2::from_shape_vec((doc.n, doc.n), doc.weights)
            .map_err(|e| Error::Shape(e.to_string()))?;
        Adjacency::new(weights, doc.kind)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Adjacency::from_json(&text).map_err(|e| match e {
            Error::Json { source, .. } => Error::json(path, source),
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn invariants_enforced() {
        assert!(Adjacency::new(array![[1.0, 0.0], [0.0, 0.0]], AdjacencyKind::Mi).is_err());
        assert!(Adjacency::new(array![[0.0, -1.0], [-1.0, 0.0]], AdjacencyKind::Mi).is_err());
        assert!(Adjacency::new(array![[0.0, 1.0], [0.5, 0.0]], AdjacencyKind::Mi).is_err());
        assert!(Adjacency::new(array![[0.0, 1.0], [1.0, 0.0]], AdjacencyKind::Mi).is_ok());
    }

    #[test]
    fn json_round_trip() {
        let a = Adjacency::new(
            array![[0.0, 0.125, 0.3], [0.125, 0.0, 1e-17], [0.3, 1e-17, 0.0]],
            AdjacencyKind::MulEd,
        )
        .unwrap();
        let text = a.to_json();
        assert!(text.contains("\"MUL_ED\""));
        assert_eq!(Adjacency::from_json(&text).unwrap(), a);
    }

    #[test]
    fn kind_names() {
        for k in AdjacencyKind::ALL {
            assert_eq!(k.as_str().parse::<AdjacencyKind>().unwrap(), k);
        }
        assert!("pearson".parse::<AdjacencyKind>().is_err());
    }
}
