//! Alternative graph constructions used by the adjacency ablation.

use ndarray::{Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Adjacency, AdjacencyKind, Montage2D};
use crate::error::{Error, Result};
use crate::features::FeatureTensor;

/// Symmetrized binary k-nearest-neighbour graph over the rows of `points`.
/// Ties in distance resolve to the lower index.
fn knn_mask(points: ArrayView2<f64>, k: usize) -> Result<Array2<f64>> {
    let n = points.nrows();
    if k == 0 || k >= n {
        return Err(Error::InvalidArgument(format!(
            "k must lie in 1..{n} for {n} nodes, got {k}"
        )));
    }
    let mut mask = Array2::zeros((n, n));
    for i in 0..n {
        let mut dist: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| {
                let d = points
                    .row(i)
                    .iter()
                    .zip(points.row(j))
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>();
                (d, j)
            })
            .collect();
        dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, j) in dist.iter().take(k) {
            mask[[i, j]] = 1.0;
            mask[[j, i]] = 1.0;
        }
    }
    Ok(mask)
}

/// Mean feature vector of each node over trials and time segments,
/// `nodes x features`.
pub fn node_mean_features(tensors: &[FeatureTensor]) -> Result<Array2<f64>> {
    let first = tensors.first().ok_or(Error::Empty("feature tensors"))?;
    let (n, f, _) = first.values.dim();
    let mut acc = Array2::<f64>::zeros((n, f));
    for t in tensors {
        if t.values.dim().0 != n || t.values.dim().1 != f {
            return Err(Error::Shape("feature tensors differ in shape".into()));
        }
        acc += &t.values.mean_axis(Axis(2)).expect("non-empty time axis");
    }
    Ok(acc / tensors.len() as f64)
}

/// k-nearest neighbours in feature (or signal) space.
pub fn knn_adjacency(points: ArrayView2<f64>, k: usize) -> Result<Adjacency> {
    Adjacency::new(knn_mask(points, k)?, AdjacencyKind::Knn)
}

/// k-nearest neighbours by scalp position.
pub fn euclidean_adjacency(montage: &Montage2D, k: usize) -> Result<Adjacency> {
    montage.validate()?;
    let coords = Array2::from_shape_fn((montage.len(), 2), |(i, d)| {
        if d == 0 {
            montage.coords[i].0
        } else {
            montage.coords[i].1
        }
    });
    Adjacency::new(knn_mask(coords.view(), k)?, AdjacencyKind::Ed)
}

/// Seeded symmetric Bernoulli(`density`) edge mask.
pub fn random_adjacency(n: usize, seed: u64, density: f64) -> Result<Adjacency> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "density must lie in (0, 1], got {density}"
        )));
    }
    if n < 2 {
        return Err(Error::InvalidArgument("random graph needs >= 2 nodes".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = Array2::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < density {
                w[[i, j]] = 1.0;
                w[[j, i]] = 1.0;
            }
        }
    }
    Adjacency::new(w, AdjacencyKind::Random)
}

/// Keeps MI weights only on the edges of a binary KNN or ED mask.
pub fn masked_mi(base: &Adjacency, mi: &Adjacency) -> Result<Adjacency> {
    let kind = match base.kind {
        AdjacencyKind::Knn => AdjacencyKind::MulKnn,
        AdjacencyKind::Ed => AdjacencyKind::MulEd,
        other => {
            return Err(Error::InvalidArgument(format!(
                "mask must be a KNN or ED graph, got {other}"
            )))
        }
    };
    if mi.kind != AdjacencyKind::Mi {
        return Err(Error::InvalidArgument(format!(
            "weights must be an MI graph, got {}",
            mi.kind
        )));
    }
    if base.n() != mi.n() {
        return Err(Error::Shape(format!("mask has {} nodes, MI has {}", base.n(), mi.n())));
    }
    if base.weights.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidArgument("mask is not binary".into()));
    }
    Adjacency::new(&base.weights * &mi.weights, kind)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn full_k_is_complete_graph() {
        let m = Montage2D::iv2a();
        let a = euclidean_adjacency(&m, m.len() - 1).unwrap();
        for ((i, j), &v) in a.weights.indexed_iter() {
            assert_eq!(v, if i == j { 0.0 } else { 1.0 });
        }
    }

    #[test]
    fn k_too_large() {
        let m = Montage2D::iv2a();
        assert!(euclidean_adjacency(&m, 22).is_err());
        assert!(euclidean_adjacency(&m, 0).is_err());
    }

    #[test]
    fn knn_on_a_line() {
        let pts = array![[0.0], [1.0], [2.5], [10.0]];
        let a = knn_adjacency(pts.view(), 1).unwrap();
        // 0<->1, 1 picks 0, 2 picks 1, 3 picks 2
        assert_eq!(
            a.weights,
            array![
                [0.0, 1.0, 0.0, 0.0],
                [1.0, 0.0, 1.0, 0.0],
                [0.0, 1.0, 0.0, 1.0],
                [0.0, 0.0, 1.0, 0.0]
            ]
        );
    }

    #[test]
    fn random_is_reproducible() {
        let a = random_adjacency(22, 7, 0.3).unwrap();
        let b = random_adjacency(22, 7, 0.3).unwrap();
        let c = random_adjacency(22, 8, 0.3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(random_adjacency(5, 1, 0.0).is_err());
        let full = random_adjacency(5, 1, 1.0).unwrap();
        assert_eq!(full.weights.sum(), 20.0);
    }

    #[test]
    fn complete_mask_keeps_mi() {
        let mi = Adjacency::new(
            array![[0.0, 0.4, 0.1], [0.4, 0.0, 0.7], [0.1, 0.7, 0.0]],
            AdjacencyKind::Mi,
        )
        .unwrap();
        let pts = array![[0.0], [1.0], [2.0]];
        let knn = knn_adjacency(pts.view(), 2).unwrap();
        let m = masked_mi(&knn, &mi).unwrap();
        assert_eq!(m.kind, AdjacencyKind::MulKnn);
        assert_eq!(m.weights, mi.weights);
        assert!(masked_mi(&mi, &mi).is_err());
    }
}
