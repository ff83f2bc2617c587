use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::DatasetManifest;
use crate::error::{Error, Result};
use crate::rng::rng_for;

/// Assignment of every image to one of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub assignments: BTreeMap<String, usize>,
}

impl FoldPlan {
    pub fn fold_of(&self, image_id: &str) -> Option<usize> {
        self.assignments.get(image_id).copied()
    }
}

/// Stratified fold index for each label. Each class is shuffled with its own seeded stream and
/// dealt round-robin, starting where the previous class stopped, so per-class fold counts differ
/// by at most one and fold sizes stay balanced.
pub fn stratified_assignment(labels: &[usize], class_names: &[String], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {k}")));
    }
    let mut by_class = vec![Vec::new(); class_names.len()];
    for (i, &c) in labels.iter().enumerate() {
        by_class[c].push(i);
    }
    let mut out = vec![usize::MAX; labels.len()];
    let mut dealt = 0usize;
    for (c, mut members) in by_class.into_iter().enumerate() {
        if members.len() < k {
            return Err(Error::ClassTooSmall {
                class: class_names[c].clone(),
                count: members.len(),
                folds: k,
            });
        }
        members.shuffle(&mut rng_for(seed, &[c as u64]));
        let count = members.len();
        for (pos, i) in members.into_iter().enumerate() {
            out[i] = (dealt + pos) % k;
        }
        dealt += count;
    }
    Ok(out)
}

pub fn make_folds(manifest: &DatasetManifest, k: usize, seed: u64) -> Result<FoldPlan> {
    let labels = manifest.label_indices();
    let folds = stratified_assignment(&labels, &manifest.class_names, k, seed)?;
    Ok(FoldPlan {
        k,
        seed,
        assignments: manifest.ids().map(str::to_string).zip(folds).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ImageRecord;
    use proptest::prelude::*;

    fn manifest(per_class: &[usize]) -> DatasetManifest {
        let classes: Vec<String> = (0..per_class.len()).map(|c| format!("c{c}")).collect();
        let mut records = Vec::new();
        for (c, &n) in per_class.iter().enumerate() {
            for i in 0..n {
                records.push(ImageRecord::new(format!("c{c}-{i}"), 10.0, 10.0, classes[c].clone()));
            }
        }
        DatasetManifest::new(records, classes).unwrap()
    }

    #[test]
    fn ten_by_150() {
        let m = manifest(&[150; 10]);
        let plan = make_folds(&m, 5, 11).unwrap();
        for c in 0..10 {
            for f in 0..5 {
                let n = m
                    .records
                    .iter()
                    .filter(|r| r.label == format!("c{c}") && plan.fold_of(&r.id) == Some(f))
                    .count();
                assert_eq!(n, 30);
            }
        }
        assert_eq!(make_folds(&m, 5, 11).unwrap(), plan);
        assert_ne!(make_folds(&m, 5, 12).unwrap(), plan);
    }

    #[test]
    fn small_class_rejected() {
        let err = make_folds(&manifest(&[10, 3]), 5, 0).unwrap_err();
        assert!(matches!(err, Error::ClassTooSmall { ref class, count: 3, folds: 5 } if class == "c1"));
    }

    proptest! {
        #[test]
        fn stratified_and_balanced(counts in prop::collection::vec(5usize..40, 1..6), k in 2usize..6, seed in any::<u64>()) {
            let m = manifest(&counts);
            let plan = make_folds(&m, k, seed).unwrap();
            prop_assert_eq!(plan.assignments.len(), m.records.len());
            for c in 0..counts.len() {
                let mut per_fold = vec![0usize; k];
                for r in m.records.iter().filter(|r| r.label == format!("c{c}")) {
                    per_fold[plan.fold_of(&r.id).unwrap()] += 1;
                }
                let (lo, hi) = (per_fold.iter().min().unwrap(), per_fold.iter().max().unwrap());
                prop_assert!(hi - lo <= 1);
            }
            let mut sizes = vec![0usize; k];
            for f in plan.assignments.values() {
                sizes[*f] += 1;
            }
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }
    }
}
