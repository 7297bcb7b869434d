//! Seeded train/validation/test splits, repetition subsets and k-fold plans.

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::seeded_rng;

/// Default train/validation/test fractions.
pub const DEFAULT_FRACTIONS: [f64; 3] = [0.5, 0.2, 0.3];

/// Disjoint row index sets covering the dataset. Each set is sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitIndices {
    /// Train and validation rows together, sorted.
    pub fn train_and_validation(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.train.iter().chain(&self.validation).copied().collect();
        all.sort_unstable();
        all
    }
}

/// Shuffles `0..n` and cuts it into `round(f0·n)` train rows,
/// `round(f1·n)` validation rows and the remainder as test rows.
pub fn split(n: usize, fractions: [f64; 3], seed: u64) -> Result<SplitIndices> {
    if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
        return Err(Error::InvalidInput(format!(
            "split fractions {fractions:?} must lie in [0, 1]"
        )));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "split fractions sum to {total}, expected 1"
        )));
    }
    if n < 10 {
        return Err(Error::InvalidInput(format!("need at least 10 rows to split, got {n}")));
    }
    let n_train = (fractions[0] * n as f64).round() as usize;
    let n_val = ((fractions[1] * n as f64).round() as usize).min(n - n_train);

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded_rng(seed));
    let mut train = order[..n_train].to_vec();
    let mut validation = order[n_train..n_train + n_val].to_vec();
    let mut test = order[n_train + n_val..].to_vec();
    train.sort_unstable();
    validation.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices {
        train,
        validation,
        test,
    })
}

/// Draws `count` random proper subsets of `indices`, each of size
/// `floor(|indices|·fraction)`. Each subset keeps the input order.
pub fn subsample_subsets(indices: &[usize], count: usize, fraction: f64, seed: u64) -> Result<Vec<Vec<usize>>> {
    if count < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 subsets, got {count}")));
    }
    let n = indices.len();
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidInput(format!(
            "subset fraction {fraction} must lie in (0, 1)"
        )));
    }
    let size = (n as f64 * fraction).floor() as usize;
    if size == 0 || size >= n {
        return Err(Error::InvalidInput(format!(
            "subset size {size} from {n} indices is not a non-empty proper subset"
        )));
    }
    let mut rng = seeded_rng(seed);
    Ok((0..count)
        .map(|_| {
            let mut picked = index::sample(&mut rng, n, size).into_vec();
            picked.sort_unstable();
            picked.into_iter().map(|p| indices[p]).collect()
        })
        .collect())
}

/// Assignment of each training row (by position) to one of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignments: Vec<usize>,
}

impl FoldPlan {
    pub fn n_rows(&self) -> usize {
        self.assignments.len()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }

    /// Positions outside and inside fold `fold`.
    pub fn fold(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        (0..self.assignments.len()).partition(|&i| self.assignments[i] != fold)
    }
}

/// Balanced random fold assignment: fold sizes differ by at most one.
pub fn kfold(n_train: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidInput(format!("k-fold needs k >= 2, got {k}")));
    }
    if n_train < k {
        return Err(Error::InvalidInput(format!("{n_train} rows cannot fill {k} folds")));
    }
    let mut order: Vec<usize> = (0..n_train).collect();
    order.shuffle(&mut seeded_rng(seed));
    let mut assignments = vec![0; n_train];
    for (i, &pos) in order.iter().enumerate() {
        assignments[pos] = i % k;
    }
    Ok(FoldPlan { k, assignments })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn split_sizes() {
        let s = split(100, DEFAULT_FRACTIONS, 3).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (50, 20, 30));
    }

    #[test]
    fn split_is_deterministic() {
        assert_eq!(
            split(10, DEFAULT_FRACTIONS, 9).unwrap(),
            split(10, DEFAULT_FRACTIONS, 9).unwrap()
        );
    }

    #[test]
    fn split_rejects_bad_fractions_and_tiny_inputs() {
        assert!(split(100, [0.5, 0.2, 0.2], 0).is_err());
        assert!(split(9, DEFAULT_FRACTIONS, 0).is_err());
    }

    #[test]
    fn twenty_subsets_of_eighty() {
        let idx: Vec<usize> = (0..100).collect();
        let subsets = subsample_subsets(&idx, 20, 0.8, 1).unwrap();
        assert_eq!(subsets.len(), 20);
        for s in &subsets {
            assert_eq!(s.len(), 80);
            assert!(s.iter().all(|i| idx.contains(i)));
            assert_ne!(s, &idx);
        }
        assert_eq!(subsets, subsample_subsets(&idx, 20, 0.8, 1).unwrap());
        assert!(subsample_subsets(&idx, 1, 0.8, 1).is_err());
        assert!(subsample_subsets(&idx, 2, 1.0, 1).is_err());
    }

    #[test]
    fn kfold_sizes() {
        assert_eq!(kfold(100, 10, 0).unwrap().fold_sizes(), vec![10; 10]);
        let mut sizes = kfold(101, 10, 0).unwrap().fold_sizes();
        sizes.sort_unstable();
        assert_eq!(sizes, [vec![10; 9], vec![11]].concat());
        assert!(kfold(100, 1, 0).is_err());
        assert!(kfold(5, 10, 0).is_err());
    }

    proptest! {
        #[test]
        fn split_partitions(n in 10usize..400, seed in any::<u64>()) {
            let s = split(n, DEFAULT_FRACTIONS, seed).unwrap();
            let mut all: Vec<usize> = s.train.iter().chain(&s.validation).chain(&s.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            prop_assert_eq!(s.train.len(), (0.5 * n as f64).round() as usize);
        }

        #[test]
        fn folds_balanced(n in 2usize..300, k in 2usize..12, seed in any::<u64>()) {
            prop_assume!(n >= k);
            let plan = kfold(n, k, seed).unwrap();
            let sizes = plan.fold_sizes();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            let (kept, held) = plan.fold(0);
            prop_assert_eq!(kept.len() + held.len(), n);
        }
    }
}
