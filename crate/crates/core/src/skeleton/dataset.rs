use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::graph::SkeletonGraph;
use super::sequence::SkeletonSequence;
use crate::error::{Error, Result};

/// Categorical exercise identity (`u01`, `i07`, `k04`, ...).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExerciseType(pub String);

impl ExerciseType {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ExerciseType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ExerciseType {
    fn from(s: &str) -> Self {
        ExerciseType(s.to_owned())
    }
}

impl From<String> for ExerciseType {
    fn from(s: String) -> Self {
        ExerciseType(s)
    }
}

/// Binary execution judgment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Assessment {
    Correct,
    Incorrect,
}

impl Assessment {
    pub fn symbol(self) -> &'static str {
        match self {
            Assessment::Correct => "+",
            Assessment::Incorrect => "-",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "+" | "correct" => Some(Assessment::Correct),
            // ASCII hyphen and the typographic minus sign are both accepted.
            "-" | "\u{2212}" | "incorrect" => Some(Assessment::Incorrect),
            _ => None,
        }
    }

    pub fn is_correct(self) -> bool {
        self == Assessment::Correct
    }
}

impl fmt::Display for Assessment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl Serialize for Assessment {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.symbol())
    }
}

impl<'de> Deserialize<'de> for Assessment {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Assessment::parse(&s).ok_or_else(|| serde::de::Error::custom(format!("bad assessment `{s}`")))
    }
}

/// Either a binary assessment or a clinical score in `[0, 50]`, never both.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Label {
    Binary(Assessment),
    Clinical(f64),
}

pub const CLINICAL_SCORE_MAX: f64 = 50.0;

impl Label {
    pub fn clinical(score: f64) -> Result<Self> {
        if !(0.0..=CLINICAL_SCORE_MAX).contains(&score) {
            return Err(Error::Argument(format!("clinical score {score} outside [0, 50]")));
        }
        Ok(Label::Clinical(score))
    }

    pub fn assessment(&self) -> Option<Assessment> {
        match *self {
            Label::Binary(a) => Some(a),
            Label::Clinical(_) => None,
        }
    }

    pub fn clinical_score(&self) -> Option<f64> {
        match *self {
            Label::Binary(_) => None,
            Label::Clinical(s) => Some(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub id: String,
    pub sequence: SkeletonSequence,
    pub exercise_type: ExerciseType,
    pub label: Label,
    pub subject_id: String,
}

impl LabeledSample {
    pub fn is_correct(&self) -> bool {
        matches!(self.label, Label::Binary(Assessment::Correct))
    }
}

/// A named collection of samples over one skeleton graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    graph: SkeletonGraph,
    samples: Vec<LabeledSample>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, graph: SkeletonGraph, samples: Vec<LabeledSample>) -> Result<Self> {
        graph.ensure_connected()?;
        let j = graph.joint_count();
        let mut channels = None;
        for s in &samples {
            if s.sequence.joint_count() != j {
                return Err(Error::Shape(format!(
                    "sample {} has {} joints, graph has {j}",
                    s.id,
                    s.sequence.joint_count()
                )));
            }
            let c = s.sequence.channel_count();
            if *channels.get_or_insert(c) != c {
                return Err(Error::Shape(format!("sample {} has {c} channels, expected {}", s.id, channels.unwrap())));
            }
            if let Label::Clinical(v) = s.label {
                Label::clinical(v)?;
            }
        }
        Ok(Dataset {
            name: name.into(),
            graph,
            samples,
        })
    }

    pub fn graph(&self) -> &SkeletonGraph {
        &self.graph
    }

    pub fn samples(&self) -> &[LabeledSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn channel_count(&self) -> Option<usize> {
        self.samples.first().map(|s| s.sequence.channel_count())
    }

    /// Sorted list of distinct exercise types.
    pub fn exercise_types(&self) -> Vec<ExerciseType> {
        let mut types: Vec<ExerciseType> = self.samples.iter().map(|s| s.exercise_type.clone()).collect();
        types.sort();
        types.dedup();
        types
    }

    /// `true` when every sample carries a binary assessment.
    pub fn is_binary(&self) -> bool {
        self.samples.iter().all(|s| matches!(s.label, Label::Binary(_)))
    }

    /// Per-type `(correct, incorrect)` counts; clinical samples are not counted.
    pub fn assessment_counts(&self) -> BTreeMap<ExerciseType, (usize, usize)> {
        let mut out: BTreeMap<ExerciseType, (usize, usize)> = BTreeMap::new();
        for s in &self.samples {
            let entry = out.entry(s.exercise_type.clone()).or_default();
            match s.label {
                Label::Binary(Assessment::Correct) => entry.0 += 1,
                Label::Binary(Assessment::Incorrect) => entry.1 += 1,
                Label::Clinical(_) => {}
            }
        }
        out
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            graph: self.graph.clone(),
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
        }
    }

    pub fn filter_type(&self, exercise_type: &ExerciseType) -> Dataset {
        let idx: Vec<usize> = (0..self.len())
            .filter(|&i| &self.samples[i].exercise_type == exercise_type)
            .collect();
        self.subset(&idx)
    }

    /// Applies `f` to every sequence, keeping labels and ids.
    pub fn map_sequences<F>(&self, mut f: F) -> Result<Dataset>
    where
        F: FnMut(&SkeletonSequence) -> Result<SkeletonSequence>,
    {
        let samples = self
            .samples
            .iter()
            .map(|s| {
                Ok(LabeledSample {
                    sequence: f(&s.sequence)?,
                    ..s.clone()
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(self.name.clone(), self.graph.clone(), samples)
    }

    /// Root-centers every frame and re-samples every sequence to `length`.
    pub fn canonicalize(&self, length: usize) -> Result<Dataset> {
        let root = self.graph.root_joint();
        self.map_sequences(|s| super::resample_temporal(&s.root_centered(root)?, length))
    }

    /// Root-mean-square coordinate magnitude over all samples.
    pub fn coordinate_scale(&self) -> f64 {
        let (sum, n) = self.samples.iter().fold((0.0, 0usize), |(acc, n), s| {
            let f = s.sequence.frames();
            (acc + f.iter().map(|v| v * v).sum::<f64>(), n + f.len())
        });
        if n == 0 {
            0.0
        } else {
            (sum / n as f64).sqrt()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;

    fn sample(id: &str, ty: &str, label: Label, j: usize) -> LabeledSample {
        LabeledSample {
            id: id.into(),
            sequence: SkeletonSequence::new(Array3::zeros((3, j, 3)), 30.0).unwrap(),
            exercise_type: ty.into(),
            label,
            subject_id: "s".into(),
        }
    }

    #[test]
    fn assessment_symbols_round_trip() {
        for a in [Assessment::Correct, Assessment::Incorrect] {
            assert_eq!(Assessment::parse(a.symbol()), Some(a));
        }
        assert_eq!(Assessment::parse("\u{2212}"), Some(Assessment::Incorrect));
        assert_eq!(Assessment::parse("?"), None);
    }

    #[test]
    fn clinical_range_enforced() {
        assert!(Label::clinical(50.0).is_ok());
        assert!(Label::clinical(50.1).is_err());
        assert!(Label::clinical(-0.1).is_err());
    }

    #[test]
    fn dataset_checks_joint_counts_and_partitions() {
        let g = SkeletonGraph::chain(2).unwrap();
        assert!(Dataset::new("x", g.clone(), vec![sample("a", "t", Label::Binary(Assessment::Correct), 3)]).is_err());
        let d = Dataset::new(
            "x",
            g,
            vec![
                sample("a", "t1", Label::Binary(Assessment::Correct), 2),
                sample("b", "t1", Label::Binary(Assessment::Incorrect), 2),
                sample("c", "t0", Label::Binary(Assessment::Correct), 2),
            ],
        )
        .unwrap();
        assert_eq!(d.exercise_types(), vec![ExerciseType::from("t0"), "t1".into()]);
        let counts = d.assessment_counts();
        assert_eq!(counts[&ExerciseType::from("t1")], (1, 1));
        // D_i = C_i ∪ I_i with C_i ∩ I_i = ∅: every sample lands in exactly one bucket.
        let total: usize = counts.values().map(|(c, i)| c + i).sum();
        assert_eq!(total, d.len());
    }
}
