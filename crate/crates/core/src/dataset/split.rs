use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::DatasetError;
use crate::rng;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split<T> {
    pub train: Vec<T>,
    pub val: Vec<T>,
    pub test: Vec<T>,
}

/// Shuffled 80/10/10 partition of `0..k`: ⌊0.8k⌋ train, ⌊0.1k⌋ validation, rest test.
pub fn split_indices(k: usize, seed: u64) -> Result<Split<usize>, DatasetError> {
    if k < 10 {
        return Err(DatasetError::TooFewSamples(k));
    }
    let mut idx: Vec<usize> = (0..k).collect();
    idx.shuffle(&mut rng::derive(seed, "split"));
    let n_train = k * 8 / 10;
    let n_val = k / 10;
    let test = idx.split_off(n_train + n_val);
    let val = idx.split_off(n_train);
    Ok(Split { train: idx, val, test })
}

/// Partitions whole items (a sample and all its partials stay together).
pub fn split<T>(items: Vec<T>, seed: u64) -> Result<Split<T>, DatasetError> {
    let s = split_indices(items.len(), seed)?;
    let mut slots: Vec<Option<T>> = items.into_iter().map(Some).collect();
    let mut take = |ix: &[usize]| ix.iter().map(|&i| slots[i].take().expect("index used once")).collect();
    Ok(Split {
        train: take(&s.train),
        val: take(&s.val),
        test: take(&s.test),
    })
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;

    #[test]
    fn sizes() {
        let s = split_indices(100, 1).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (80, 10, 10));
        let s = split_indices(10, 1).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (8, 1, 1));
        let s = split_indices(37, 1).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (29, 3, 5));
        assert!(matches!(split_indices(9, 1), Err(DatasetError::TooFewSamples(9))));
    }

    #[test]
    fn disjoint_exhaustive_deterministic() {
        for k in [10, 11, 57, 300] {
            let s = split_indices(k, 5).unwrap();
            let all: HashSet<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
            assert_eq!(all.len(), k);
            assert_eq!(s, split_indices(k, 5).unwrap());
        }
        assert_ne!(split_indices(50, 5).unwrap(), split_indices(50, 6).unwrap());
    }

    #[test]
    fn split_moves_items() {
        let items: Vec<String> = (0..20).map(|i| format!("s{i}")).collect();
        let s = split(items.clone(), 3).unwrap();
        let idx = split_indices(20, 3).unwrap();
        assert_eq!(s.val, idx.val.iter().map(|&i| items[i].clone()).collect::<Vec<_>>());
    }
}
