use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::VideoRecord;
use crate::Label;

/// Two disjoint halves of a dataset, stratified by class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub fold_a: Vec<String>,
    pub fold_b: Vec<String>,
    pub seed: u64,
}

impl FoldSplit {
    pub fn len(&self) -> usize {
        self.fold_a.len() + self.fold_b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Stratified random halving. Each class is shuffled and split in half; when
/// a class has an odd count, the extra video goes to fold A for the first such
/// class and to fold B for the next, so fold sizes stay within one.
///
/// The result depends on the set of records and the seed, not on record order.
pub fn split_1x2(records: &[VideoRecord], seed: u64) -> Result<FoldSplit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = FoldSplit {
        fold_a: Vec::new(),
        fold_b: Vec::new(),
        seed,
    };
    let mut extra_to_a = true;
    for class in [Label::Sensitive, Label::NonSensitive] {
        let mut ids: Vec<&str> = records.iter().filter(|r| r.label == class).map(|r| r.id.as_str()).collect();
        if ids.len() < 2 {
            return Err(Error::TooFewRecords(format!(
                "{} {class} video(s); each fold needs at least one of each class",
                ids.len()
            )));
        }
        ids.sort_unstable();
        ids.shuffle(&mut rng);
        let mut in_a = ids.len() / 2;
        if ids.len() % 2 == 1 {
            if extra_to_a {
                in_a += 1;
            }
            extra_to_a = !extra_to_a;
        }
        split.fold_a.extend(ids[..in_a].iter().map(|s| s.to_string()));
        split.fold_b.extend(ids[in_a..].iter().map(|s| s.to_string()));
    }
    split.fold_a.sort();
    split.fold_b.sort();
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn records(pos: usize, neg: usize) -> Vec<VideoRecord> {
        (0..pos)
            .map(|i| VideoRecord::new(format!("p{i}"), "x.mp4", Label::Sensitive))
            .chain((0..neg).map(|i| VideoRecord::new(format!("n{i}"), "x.mp4", Label::NonSensitive)))
            .collect()
    }

    fn class_count(fold: &[String], prefix: char) -> usize {
        fold.iter().filter(|id| id.starts_with(prefix)).count()
    }

    #[test]
    fn balanced() {
        for seed in 0..5 {
            let s = split_1x2(&records(10, 10), seed).unwrap();
            assert_eq!((s.fold_a.len(), s.fold_b.len()), (10, 10));
            assert_eq!(class_count(&s.fold_a, 'p'), 5);
            assert_eq!(class_count(&s.fold_b, 'n'), 5);
        }
    }

    #[test]
    fn seven_and_five() {
        let s = split_1x2(&records(7, 5), 3).unwrap();
        assert_eq!((s.fold_a.len(), s.fold_b.len()), (6, 6));
        assert_eq!(class_count(&s.fold_a, 'p'), 4);
        assert_eq!(class_count(&s.fold_b, 'p'), 3);
        assert_eq!(class_count(&s.fold_a, 'n'), 2);
        assert_eq!(class_count(&s.fold_b, 'n'), 3);
    }

    #[test]
    fn deterministic_and_order_free() {
        let r = records(9, 6);
        let mut rev = r.clone();
        rev.reverse();
        assert_eq!(split_1x2(&r, 11).unwrap(), split_1x2(&rev, 11).unwrap());
        assert_ne!(split_1x2(&r, 11).unwrap(), split_1x2(&r, 12).unwrap());
    }

    #[test]
    fn too_few() {
        assert!(matches!(split_1x2(&records(1, 5), 0), Err(Error::TooFewRecords(_))));
        assert!(matches!(split_1x2(&records(4, 0), 0), Err(Error::TooFewRecords(_))));
    }

    proptest! {
        #[test]
        fn split_properties(pos in 2usize..40, neg in 2usize..40, seed in any::<u64>()) {
            let s = split_1x2(&records(pos, neg), seed).unwrap();
            let a: HashSet<_> = s.fold_a.iter().collect();
            let b: HashSet<_> = s.fold_b.iter().collect();
            prop_assert!(a.is_disjoint(&b));
            prop_assert_eq!(a.len() + b.len(), pos + neg);
            prop_assert!(s.fold_a.len().abs_diff(s.fold_b.len()) <= 1);
            prop_assert!(class_count(&s.fold_a, 'p').abs_diff(class_count(&s.fold_b, 'p')) <= 1);
            prop_assert!(class_count(&s.fold_a, 'n').abs_diff(class_count(&s.fold_b, 'n')) <= 1);
        }
    }
}
