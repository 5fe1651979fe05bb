//! Seeded k-fold partitions.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_FOLDS: usize = 10;

/// Test positions of each fold. Positions index the corpus the plan was
/// built for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    folds: Vec<Vec<usize>>,
}

impl FoldPlan {
    pub fn folds(&self) -> &[Vec<usize>] {
        &self.folds
    }

    /// Sorted test positions of fold `i`.
    pub fn test_positions(&self, i: usize) -> &[usize] {
        &self.folds[i]
    }

    /// Every position outside fold `i`, in corpus order.
    pub fn train_positions(&self, i: usize) -> Vec<usize> {
        let n: usize = self.folds.iter().map(Vec::len).sum();
        let mut in_test = vec![false; n];
        for &p in &self.folds[i] {
            in_test[p] = true;
        }
        (0..n).filter(|&p| !in_test[p]).collect()
    }
}

/// Shuffles `0..n` with `seed` and cuts it into `k` contiguous parts; the
/// first `n % k` parts get one extra position.
pub fn kfold(n: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Config(format!("folds: need at least 2, got {k}")));
    }
    if k > n {
        return Err(Error::Input(format!("cannot cut {n} samples into {k} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let len = base + usize::from(i < extra);
        let mut part = order[start..start + len].to_vec();
        part.sort_unstable();
        folds.push(part);
        start += len;
    }
    Ok(FoldPlan { k, seed, folds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hundred_into_ten() {
        let plan = kfold(100, 10, 3).unwrap();
        assert!(plan.folds().iter().all(|f| f.len() == 10));
        assert_eq!(plan, kfold(100, 10, 3).unwrap());
        assert_ne!(plan, kfold(100, 10, 4).unwrap());
    }

    #[test]
    fn too_many_folds() {
        assert!(kfold(5, 6, 0).is_err());
        assert!(kfold(5, 1, 0).is_err());
        assert!(kfold(5, 5, 0).is_ok());
    }

    proptest! {
        #[test]
        fn folds_partition(n in 2usize..300, k in 2usize..12, seed: u64) {
            prop_assume!(k <= n);
            let plan = kfold(n, k, seed).unwrap();
            let mut all: Vec<usize> = plan.folds().iter().flatten().copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            let sizes: Vec<usize> = plan.folds().iter().map(Vec::len).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            for i in 0..k {
                let train = plan.train_positions(i);
                prop_assert_eq!(train.len() + plan.test_positions(i).len(), n);
                prop_assert!(train.iter().all(|p| plan.test_positions(i).binary_search(p).is_err()));
            }
        }
    }
}
