use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngState;

/// Fold index for every sample, in sample order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignment: Vec<usize>,
}

impl FoldPlan {
    pub fn validation(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] == fold).collect()
    }

    pub fn training(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] != fold).collect()
    }
}

/// Stratified random folds: each class is shuffled and dealt round-robin,
/// and the dealing position carries over from one class to the next so fold
/// sizes also stay within one of each other.
pub fn make_folds(labels: &[u8], k: usize, rng: &mut RngState) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Argument(format!("need k >= 2 folds, got {k}")));
    }
    if labels.is_empty() {
        return Err(Error::EmptyDataset("cannot split an empty dataset".into()));
    }
    let mut classes: Vec<u8> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let mut assignment = vec![usize::MAX; labels.len()];
    let mut next = 0;
    for class in classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < k {
            return Err(Error::InsufficientData(format!(
                "class {class} has {} samples, fewer than k = {k}",
                members.len()
            )));
        }
        members.shuffle(rng);
        for i in members {
            assignment[i] = next;
            next = (next + 1) % k;
        }
    }
    Ok(FoldPlan { k, assignment })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_stratification() {
        let labels = [0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
        let plan = make_folds(&labels, 5, &mut RngState::new(1)).unwrap();
        for f in 0..5 {
            let v = plan.validation(f);
            assert_eq!(v.len(), 2);
            assert_eq!(v.iter().filter(|&&i| labels[i] == 1).count(), 1);
        }
    }

    #[test]
    fn small_class_rejected() {
        let err = make_folds(&[0, 0, 0, 1], 2, &mut RngState::new(0)).unwrap_err();
        assert!(matches!(err, Error::InsufficientData(_)));
        assert!(make_folds(&[0, 1], 1, &mut RngState::new(0)).is_err());
    }

    proptest! {
        #[test]
        fn partition_and_balance(labels in proptest::collection::vec(0u8..2, 10..80), k in 2usize..6, seed: u64) {
            let pos = labels.iter().filter(|&&l| l == 1).count();
            let neg = labels.len() - pos;
            prop_assume!(pos >= k && neg >= k);
            let plan = make_folds(&labels, k, &mut RngState::new(seed)).unwrap();
            prop_assert_eq!(&plan, &make_folds(&labels, k, &mut RngState::new(seed)).unwrap());
            prop_assert!(plan.assignment.iter().all(|&f| f < k));
            let mut seen = vec![false; labels.len()];
            for f in 0..k {
                let v = plan.validation(f);
                for &i in &v {
                    prop_assert!(!seen[i]);
                    seen[i] = true;
                }
                let p = v.iter().filter(|&&i| labels[i] == 1).count() as f64;
                let expect = pos as f64 / k as f64;
                prop_assert!((p - expect).abs() <= 1.0);
                let n = (v.len() as f64 - p) - neg as f64 / k as f64;
                prop_assert!(n.abs() <= 1.0);
            }
            prop_assert!(seen.into_iter().all(|s| s));
        }
    }
}
