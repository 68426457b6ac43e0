use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
}

/// Seeded shuffle, then contiguous validation folds. The first
/// `n % folds` folds take one extra trial.
pub fn kfold_split(n_trials: usize, folds: usize, seed: u64) -> Result<Vec<Fold>> {
    if folds < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {folds}")));
    }
    if folds > n_trials {
        return Err(Error::InvalidArgument(format!(
            "{folds} folds for {n_trials} trials"
        )));
    }
    let mut order: Vec<usize> = (0..n_trials).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let base = n_trials / folds;
    let extra = n_trials % folds;
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for k in 0..folds {
        let len = base + usize::from(k < extra);
        let val = order[start..start + len].to_vec();
        let train = order[..start]
            .iter()
            .chain(&order[start + len..])
            .copied()
            .collect();
        out.push(Fold { train, val });
        start += len;
    }
    Ok(out)
}
