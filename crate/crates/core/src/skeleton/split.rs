use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, Label};
use crate::error::{Error, Result};

/// Train/validation protocols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitScheme {
    /// One stratified 75% / 25% split.
    #[serde(rename = "ratio_3_1")]
    Ratio3To1,
    /// Five stratified folds.
    #[serde(rename = "kfold_5")]
    KFold5,
}

impl SplitScheme {
    pub fn name(self) -> &'static str {
        match self {
            SplitScheme::Ratio3To1 => "ratio_3_1",
            SplitScheme::KFold5 => "kfold_5",
        }
    }

    pub fn fold_count(self) -> usize {
        match self {
            SplitScheme::Ratio3To1 => 1,
            SplitScheme::KFold5 => 5,
        }
    }
}

impl fmt::Display for SplitScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SplitScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ratio_3_1" | "3:1" => Ok(SplitScheme::Ratio3To1),
            "kfold_5" | "5fold" => Ok(SplitScheme::KFold5),
            _ => Err(Error::Usage(format!("unknown split scheme `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitOptions {
    /// Keep every subject's samples on one side of each split.
    pub subject_aware: bool,
}

/// Sample indices of one train/validation pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Groups of indices that must stay together, keyed for stratification.
fn units(dataset: &Dataset, opts: SplitOptions) -> BTreeMap<String, Vec<Vec<usize>>> {
    let mut strata: BTreeMap<String, Vec<Vec<usize>>> = BTreeMap::new();
    if opts.subject_aware {
        let mut by_subject: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, s) in dataset.samples().iter().enumerate() {
            by_subject.entry(s.subject_id.as_str()).or_default().push(i);
        }
        strata.insert("subjects".into(), by_subject.into_values().collect());
    } else {
        for (i, s) in dataset.samples().iter().enumerate() {
            let label = match s.label {
                Label::Binary(a) => a.symbol(),
                Label::Clinical(_) => "score",
            };
            strata
                .entry(format!("{}|{label}", s.exercise_type))
                .or_default()
                .push(vec![i]);
        }
    }
    strata
}

pub fn split_indices(dataset: &Dataset, scheme: SplitScheme, seed: u64, opts: SplitOptions) -> Result<Vec<Fold>> {
    if dataset.is_empty() {
        return Err(Error::Argument("cannot split an empty dataset".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // 3:1 needs four units per stratum, k-fold needs k.
    let min_units = match scheme {
        SplitScheme::Ratio3To1 => 4,
        SplitScheme::KFold5 => 5,
    };
    let mut groups: Vec<Vec<Vec<usize>>> = Vec::new();
    let mut pool: Vec<Vec<usize>> = Vec::new();
    for (key, mut members) in units(dataset, opts) {
        if members.len() < min_units {
            log::warn!(
                "stratum {key} has {} units, fewer than {min_units}; assigned without stratification",
                members.len()
            );
            pool.append(&mut members);
        } else {
            members.shuffle(&mut rng);
            groups.push(members);
        }
    }
    if !pool.is_empty() {
        pool.shuffle(&mut rng);
        groups.push(pool);
    }

    let k = scheme.fold_count();
    let mut folds = vec![
        Fold {
            train: Vec::new(),
            validation: Vec::new()
        };
        k
    ];
    match scheme {
        SplitScheme::Ratio3To1 => {
            for group in groups {
                let n_val = (group.len() as f64 / 4.0).round() as usize;
                for (pos, unit) in group.into_iter().enumerate() {
                    let side = if pos < n_val {
                        &mut folds[0].validation
                    } else {
                        &mut folds[0].train
                    };
                    side.extend(unit);
                }
            }
        }
        SplitScheme::KFold5 => {
            let mut offset = 0;
            let mut assignment: Vec<Vec<usize>> = vec![Vec::new(); k];
            for group in groups {
                let len = group.len();
                for (pos, unit) in group.into_iter().enumerate() {
                    assignment[(offset + pos) % k].extend(unit);
                }
                offset = (offset + len) % k;
            }
            for (f, fold) in folds.iter_mut().enumerate() {
                fold.validation = assignment[f].clone();
                fold.train = assignment
                    .iter()
                    .enumerate()
                    .filter(|&(g, _)| g != f)
                    .flat_map(|(_, v)| v.iter().copied())
                    .collect();
            }
        }
    }
    for fold in &mut folds {
        fold.train.sort_unstable();
        fold.validation.sort_unstable();
    }
    Ok(folds)
}

/// Materialized `(train, validation)` dataset pairs.
pub fn split(dataset: &Dataset, scheme: SplitScheme, seed: u64) -> Result<Vec<(Dataset, Dataset)>> {
    Ok(split_indices(dataset, scheme, seed, SplitOptions::default())?
        .into_iter()
        .map(|f| (dataset.subset(&f.train), dataset.subset(&f.validation)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::{Assessment, LabeledSample, SkeletonGraph, SkeletonSequence};
    use ndarray::Array3;

    fn dataset(correct: usize, incorrect: usize) -> Dataset {
        let samples = (0..correct + incorrect)
            .map(|i| LabeledSample {
                id: format!("s{i}"),
                sequence: SkeletonSequence::new(Array3::zeros((2, 2, 3)), 30.0).unwrap(),
                exercise_type: "u01".into(),
                label: Label::Binary(if i < correct {
                    Assessment::Correct
                } else {
                    Assessment::Incorrect
                }),
                subject_id: format!("subj{}", i % 7),
            })
            .collect();
        Dataset::new("t", SkeletonGraph::chain(2).unwrap(), samples).unwrap()
    }

    fn count_correct(ds: &Dataset, idx: &[usize]) -> usize {
        idx.iter().filter(|&&i| ds.samples()[i].is_correct()).count()
    }

    #[test]
    fn ratio_split_is_stratified() {
        let ds = dataset(20, 20);
        let folds = split_indices(&ds, SplitScheme::Ratio3To1, 1, SplitOptions::default()).unwrap();
        assert_eq!(folds.len(), 1);
        assert_eq!(folds[0].train.len(), 30);
        assert_eq!(folds[0].validation.len(), 10);
        assert_eq!(count_correct(&ds, &folds[0].train), 15);
        assert_eq!(count_correct(&ds, &folds[0].validation), 5);
    }

    #[test]
    fn kfold_partitions_dataset() {
        let ds = dataset(20, 20);
        let folds = split_indices(&ds, SplitScheme::KFold5, 3, SplitOptions::default()).unwrap();
        assert_eq!(folds.len(), 5);
        let mut all: Vec<usize> = Vec::new();
        for f in &folds {
            assert_eq!(f.validation.len(), 8);
            assert_eq!(f.train.len(), 32);
            assert!(f.validation.iter().all(|v| !f.train.contains(v)));
            all.extend(&f.validation);
        }
        all.sort_unstable();
        assert_eq!(all, (0..40).collect::<Vec<_>>());
    }

    #[test]
    fn deterministic_given_seed() {
        let ds = dataset(13, 9);
        for scheme in [SplitScheme::Ratio3To1, SplitScheme::KFold5] {
            let a = split_indices(&ds, scheme, 42, SplitOptions::default()).unwrap();
            let b = split_indices(&ds, scheme, 42, SplitOptions::default()).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn tiny_strata_are_pooled() {
        let ds = dataset(3, 2);
        let folds = split_indices(&ds, SplitScheme::KFold5, 0, SplitOptions::default()).unwrap();
        let total: usize = folds.iter().map(|f| f.validation.len()).sum();
        assert_eq!(total, 5);
    }

    #[test]
    fn subject_aware_keeps_subjects_together() {
        let ds = dataset(20, 15);
        let folds = split_indices(&ds, SplitScheme::KFold5, 9, SplitOptions { subject_aware: true }).unwrap();
        for f in &folds {
            for &v in &f.validation {
                let subj = &ds.samples()[v].subject_id;
                assert!(f.train.iter().all(|&t| &ds.samples()[t].subject_id != subj));
            }
        }
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let ds = Dataset::new("e", SkeletonGraph::chain(2).unwrap(), vec![]).unwrap();
        assert!(split_indices(&ds, SplitScheme::KFold5, 0, SplitOptions::default()).is_err());
    }
}
