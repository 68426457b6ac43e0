//! Hemispheric asymmetry and caudality features built from DE tensors.

use ndarray::{concatenate, Array3, ArrayView3, Axis};
use serde::{Deserialize, Serialize};

use super::{FeatureKind, EPS};
use crate::error::{Error, Result};

/// Electrode pairs for the asymmetry (left/right) and caudality
/// (frontal/posterior) features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MontagePairs {
    pub lr_pairs: Vec<(usize, usize)>,
    pub fp_pairs: Vec<(usize, usize)>,
}

const LR_NAMES: [(&str, &str); 8] = [
    ("FC3", "FC4"),
    ("FC1", "FC2"),
    ("C5", "C6"),
    ("C3", "C4"),
    ("C1", "C2"),
    ("CP3", "CP4"),
    ("CP1", "CP2"),
    ("P1", "P2"),
];

const FP_NAMES: [(&str, &str); 5] = [
    ("FC3", "CP3"),
    ("FC1", "CP1"),
    ("FCz", "CPz"),
    ("FC2", "CP2"),
    ("FC4", "CP4"),
];

impl MontagePairs {
    /// Resolves the default 22-channel pairs against `channel_names`
    /// (case-insensitive).
    pub fn from_channel_names(channel_names: &[String]) -> Result<Self> {
        let find = |name: &str| {
            channel_names
                .iter()
                .position(|c| c.eq_ignore_ascii_case(name))
                .ok_or_else(|| Error::Unknown {
                    what: "montage channel",
                    value: name.to_string(),
                })
        };
        let resolve = |names: &[(&str, &str)]| -> Result<Vec<(usize, usize)>> {
            names.iter().map(|&(a, b)| Ok((find(a)?, find(b)?))).collect()
        };
        let pairs = Self {
            lr_pairs: resolve(&LR_NAMES)?,
            fp_pairs: resolve(&FP_NAMES)?,
        };
        pairs.validate(channel_names.len())?;
        Ok(pairs)
    }

    pub fn validate(&self, n_nodes: usize) -> Result<()> {
        for (label, list) in [("lr_pairs", &self.lr_pairs), ("fp_pairs", &self.fp_pairs)] {
            let mut seen = vec![false; n_nodes];
            for &(a, b) in list.iter() {
                if a >= n_nodes || b >= n_nodes || a == b {
                    return Err(Error::InvalidArgument(format!(
                        "{label}: bad pair ({a}, {b}) for {n_nodes} nodes"
                    )));
                }
                for idx in [a, b] {
                    if std::mem::replace(&mut seen[idx], true) {
                        return Err(Error::InvalidArgument(format!(
                            "{label}: node {idx} used twice"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Pair list consumed by `kind`.
    pub fn pairs_for(&self, kind: FeatureKind) -> Option<&[(usize, usize)]> {
        match kind {
            FeatureKind::Dasm | FeatureKind::Rasm | FeatureKind::Asm => Some(&self.lr_pairs),
            FeatureKind::Dcau => Some(&self.fp_pairs),
            FeatureKind::De | FeatureKind::Psd => None,
        }
    }
}

fn pairwise(
    de: ArrayView3<f64>,
    pairs: &[(usize, usize)],
    op: impl Fn(f64, f64) -> f64,
) -> Array3<f64> {
    let (_, f, t) = de.dim();
    Array3::from_shape_fn((pairs.len(), f, t), |(p, j, s)| {
        let (a, b) = pairs[p];
        op(de[[a, j, s]], de[[b, j, s]])
    })
}

fn ratio(a: f64, b: f64) -> f64 {
    // floor the denominator magnitude, keep its sign
    let denom = if b.abs() < EPS { EPS.copysign(b) } else { b };
    a / denom
}

/// Pair-indexed asymmetry features (`pairs x F' x T`) from an
/// `N x F x T` DE tensor. ASM stacks DASM then RASM along the feature axis.
pub fn asym_features(
    de: ArrayView3<f64>,
    pairs: &MontagePairs,
    kind: FeatureKind,
) -> Result<Array3<f64>> {
    let list = pairs.pairs_for(kind).ok_or(Error::InvalidArgument(format!(
        "{kind} is not an asymmetry feature"
    )))?;
    if list.is_empty() {
        return Err(Error::Empty("pair list"));
    }
    pairs.validate(de.dim().0)?;
    Ok(match kind {
        FeatureKind::Dasm | FeatureKind::Dcau => pairwise(de, list, |a, b| a - b),
        FeatureKind::Rasm => pairwise(de, list, ratio),
        FeatureKind::Asm => {
            let d = pairwise(de, list, |a, b| a - b);
            let r = pairwise(de, list, ratio);
            concatenate(Axis(1), &[d.view(), r.view()]).expect("matching pair shapes")
        }
        FeatureKind::De | FeatureKind::Psd => unreachable!(),
    })
}

/// Places pair features back on the electrode graph: both members of a
/// pair carry that pair's feature vector, unpaired nodes are zero.
pub fn scatter_to_nodes(
    pair_values: ArrayView3<f64>,
    pairs: &[(usize, usize)],
    n_nodes: usize,
) -> Array3<f64> {
    let (_, f, t) = pair_values.dim();
    let mut out = Array3::zeros((n_nodes, f, t));
    for (p, &(a, b)) in pairs.iter().enumerate() {
        let src = pair_values.index_axis(Axis(0), p);
        out.index_axis_mut(Axis(0), a).assign(&src);
        out.index_axis_mut(Axis(0), b).assign(&src);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs() -> MontagePairs {
        MontagePairs {
            lr_pairs: vec![(0, 1), (2, 3)],
            fp_pairs: vec![(0, 2)],
        }
    }

    #[test]
    fn symmetric_de_gives_zero_and_one() {
        let de = Array3::from_elem((4, 3, 2), 1.7);
        let d = asym_features(de.view(), &pairs(), FeatureKind::Dasm).unwrap();
        let r = asym_features(de.view(), &pairs(), FeatureKind::Rasm).unwrap();
        assert!(d.iter().all(|&v| v == 0.0));
        assert!(r.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn two_over_one() {
        let mut de = Array3::from_elem((4, 1, 1), 1.0);
        de[[0, 0, 0]] = 2.0;
        let asm = asym_features(de.view(), &pairs(), FeatureKind::Asm).unwrap();
        assert_eq!(asm.dim(), (2, 2, 1));
        assert_eq!(asm[[0, 0, 0]], 1.0);
        assert_eq!(asm[[0, 1, 0]], 2.0);
    }

    #[test]
    fn dcau_of_equal_regions_is_zero() {
        let de = Array3::from_shape_fn((4, 2, 3), |(n, f, t)| {
            if n == 0 || n == 2 {
                (f + t) as f64
            } else {
                5.0
            }
        });
        let d = asym_features(de.view(), &pairs(), FeatureKind::Dcau).unwrap();
        assert!(d.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn empty_pairs_rejected() {
        let p = MontagePairs {
            lr_pairs: vec![],
            fp_pairs: vec![(0, 1)],
        };
        let de = Array3::zeros((2, 1, 1));
        assert!(matches!(
            asym_features(de.view(), &p, FeatureKind::Dasm),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn reused_index_rejected() {
        let p = MontagePairs {
            lr_pairs: vec![(0, 1), (1, 2)],
            fp_pairs: vec![],
        };
        assert!(p.validate(3).is_err());
    }

    #[test]
    fn rasm_denominator_floor() {
        let mut de = Array3::zeros((2, 1, 1));
        de[[0, 0, 0]] = 1.0;
        let p = MontagePairs {
            lr_pairs: vec![(0, 1)],
            fp_pairs: vec![],
        };
        let r = asym_features(de.view(), &p, FeatureKind::Rasm).unwrap();
        assert!(r[[0, 0, 0]].is_finite());
        assert_eq!(r[[0, 0, 0]], 1.0 / EPS);
    }
}
