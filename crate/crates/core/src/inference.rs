//! Per-type reference representations, similarity scores and thresholds.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::contrastive::cosine_sim;
use crate::error::{Error, Result};
use crate::model::{HeadMode, ModelState};
use crate::skeleton::{Assessment, Dataset, ExerciseType, LabeledSample};

pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const DEFAULT_VARIANCE_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceKind {
    /// Divide by `M`.
    #[default]
    Population,
    /// Divide by `M - 1`.
    Sample,
}

impl std::str::FromStr for VarianceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "population" => Ok(VarianceKind::Population),
            "sample" => Ok(VarianceKind::Sample),
            _ => Err(Error::Usage(format!("unknown variance kind `{s}` (expected population or sample)"))),
        }
    }
}

/// Inverse-variance weighted aggregate of the correct embeddings of one type.
///
/// `w = 1 / (Var(V) + eps)` per feature, normalized to unit L1 norm, then
/// multiplied elementwise with the column sum of `V`.
pub fn build_reference(correct: ArrayView2<'_, f64>, eps: f64, variance: VarianceKind) -> Result<Array1<f64>> {
    let m = correct.nrows();
    if m < 2 {
        return Err(Error::InsufficientCorrect(format!("{m} correct sample(s), need at least 2")));
    }
    if correct.iter().any(|v| !v.is_finite()) {
        return Err(Error::Argument("non-finite embedding".into()));
    }
    let ddof = match variance {
        VarianceKind::Population => 0.0,
        VarianceKind::Sample => 1.0,
    };
    let var = correct.var_axis(Axis(0), ddof);
    let w = var.mapv(|v| 1.0 / (v + eps));
    let w = &w / w.sum();
    Ok(w * correct.sum_axis(Axis(0)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeReference {
    pub vector: Vec<f64>,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReferenceOptions {
    pub head_mode: HeadMode,
    pub variance_epsilon: f64,
    pub variance: VarianceKind,
    pub default_threshold: f64,
}

impl Default for ReferenceOptions {
    fn default() -> Self {
        ReferenceOptions {
            head_mode: HeadMode::WithProjection,
            variance_epsilon: DEFAULT_VARIANCE_EPSILON,
            variance: VarianceKind::Population,
            default_threshold: DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSet {
    pub references: BTreeMap<ExerciseType, TypeReference>,
    pub head_mode: HeadMode,
    pub variance_epsilon: f64,
    pub variance: VarianceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint_id: Option<String>,
}

impl ReferenceSet {
    pub fn get(&self, exercise_type: &ExerciseType) -> Result<&TypeReference> {
        self.references
            .get(exercise_type)
            .ok_or_else(|| Error::UnknownExerciseType(exercise_type.to_string()))
    }

    pub fn threshold(&self, exercise_type: &ExerciseType) -> Result<f64> {
        Ok(self.get(exercise_type)?.threshold)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_vec_pretty(self)?;
        crate::model::write_atomic(path, &json)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let refs: ReferenceSet = serde_json::from_slice(&bytes)?;
        for (ty, r) in &refs.references {
            if !(-1.0..=1.0).contains(&r.threshold) || !r.vector.iter().any(|&v| v != 0.0) {
                return Err(Error::Argument(format!("invalid reference for type {ty} in {}", path.display())));
            }
        }
        Ok(refs)
    }
}

/// Representations of every sample of a dataset, one row each.
pub fn represent_dataset(state: &ModelState, data: &Dataset, mode: HeadMode) -> Result<Array2<f64>> {
    let seqs: Vec<_> = data.samples().iter().map(|s| &s.sequence).collect();
    if seqs.is_empty() {
        let width = match mode {
            HeadMode::EncoderOnly => state.encoder.embedding_dim(),
            HeadMode::WithProjection => state.projection_head()?.config().out_dim,
        };
        return Ok(Array2::zeros((0, width)));
    }
    state.represent_sequences(&seqs, mode)
}

pub fn build_reference_set(state: &ModelState, train: &Dataset, options: &ReferenceOptions) -> Result<ReferenceSet> {
    let mut by_type: BTreeMap<ExerciseType, Vec<usize>> = BTreeMap::new();
    for (i, s) in train.samples().iter().enumerate() {
        by_type.entry(s.exercise_type.clone()).or_default();
        if s.is_correct() {
            by_type.entry(s.exercise_type.clone()).or_default().push(i);
        }
    }
    let chosen: Vec<usize> = by_type.values().filter(|v| v.len() >= 2).flatten().copied().collect();
    let reps = represent_dataset(state, &train.subset(&chosen), options.head_mode)?;
    let row_of: BTreeMap<usize, usize> = chosen.iter().enumerate().map(|(r, &i)| (i, r)).collect();

    let mut references = BTreeMap::new();
    for (ty, idx) in by_type {
        if idx.len() < 2 {
            log::warn!("exercise type {ty} has {} correct training sample(s); no reference built", idx.len());
            continue;
        }
        let rows: Vec<usize> = idx.iter().map(|i| row_of[i]).collect();
        let v = reps.select(Axis(0), &rows);
        let r = build_reference(v.view(), options.variance_epsilon, options.variance)?;
        if !r.iter().any(|&x| x != 0.0) {
            log::warn!("reference for {ty} is the zero vector; omitted");
            continue;
        }
        references.insert(
            ty,
            TypeReference {
                vector: r.to_vec(),
                threshold: options.default_threshold,
            },
        );
    }
    if references.is_empty() {
        return Err(Error::InsufficientCorrect(
            "no exercise type has two correct training samples".into(),
        ));
    }
    Ok(ReferenceSet {
        references,
        head_mode: options.head_mode,
        variance_epsilon: options.variance_epsilon,
        variance: options.variance,
        checkpoint_id: None,
    })
}

/// Cosine similarity of a representation to the reference of `exercise_type`.
pub fn score_representation(refs: &ReferenceSet, exercise_type: &ExerciseType, rep: ndarray::ArrayView1<'_, f64>) -> Result<f64> {
    let r = refs.get(exercise_type)?;
    cosine_sim(rep, ndarray::ArrayView1::from(&r.vector[..]))
}

pub fn score_sample(state: &ModelState, refs: &ReferenceSet, sample: &LabeledSample) -> Result<f64> {
    refs.get(&sample.exercise_type)?;
    let rep = state.represent_sequences(&[&sample.sequence], refs.head_mode)?;
    score_representation(refs, &sample.exercise_type, rep.row(0))
}

/// Scores for every sample, in dataset order.
pub fn score_dataset(state: &ModelState, refs: &ReferenceSet, data: &Dataset) -> Result<Vec<f64>> {
    for s in data.samples() {
        refs.get(&s.exercise_type)?;
    }
    let reps = represent_dataset(state, data, refs.head_mode)?;
    data.samples()
        .iter()
        .zip(reps.rows())
        .map(|(s, rep)| score_representation(refs, &s.exercise_type, rep))
        .collect()
}

pub fn classify(score: f64, threshold: f64) -> Assessment {
    if score >= threshold {
        Assessment::Correct
    } else {
        Assessment::Incorrect
    }
}

/// Threshold maximizing balanced accuracy over midpoints between consecutive
/// distinct scores; ties go to the larger threshold. `None` when only one
/// class is present or every score is equal.
pub fn select_threshold(scores: &[f64], truth: &[Assessment]) -> Option<(f64, f64)> {
    let positives = truth.iter().filter(|z| z.is_correct()).count();
    let negatives = truth.len() - positives;
    if positives == 0 || negatives == 0 {
        return None;
    }
    let mut distinct: Vec<f64> = scores.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let mut best: Option<(f64, f64)> = None;
    for pair in distinct.windows(2) {
        let theta = 0.5 * (pair[0] + pair[1]);
        let (mut tp, mut tn) = (0usize, 0usize);
        for (&s, z) in scores.iter().zip(truth) {
            match (classify(s, theta), z) {
                (Assessment::Correct, Assessment::Correct) => tp += 1,
                (Assessment::Incorrect, Assessment::Incorrect) => tn += 1,
                _ => {}
            }
        }
        let bal = 0.5 * (tp as f64 / positives as f64 + tn as f64 / negatives as f64);
        if best.is_none_or(|(_, b)| bal >= b) {
            best = Some((theta, bal));
        }
    }
    best
}

/// Per-type thresholds chosen on training-set scores.
pub fn calibrate_thresholds(state: &ModelState, refs: &ReferenceSet, train: &Dataset) -> Result<ReferenceSet> {
    let known: Vec<usize> = (0..train.len())
        .filter(|&i| refs.references.contains_key(&train.samples()[i].exercise_type))
        .collect();
    let data = train.subset(&known);
    let scores = score_dataset(state, refs, &data)?;
    Ok(calibrate_from_scores(refs, &data, &scores))
}

pub fn calibrate_from_scores(refs: &ReferenceSet, data: &Dataset, scores: &[f64]) -> ReferenceSet {
    let mut out = refs.clone();
    for (ty, reference) in out.references.iter_mut() {
        let (s, z): (Vec<f64>, Vec<Assessment>) = data
            .samples()
            .iter()
            .zip(scores)
            .filter(|(sample, _)| &sample.exercise_type == ty)
            .filter_map(|(sample, &score)| sample.label.assessment().map(|a| (score, a)))
            .unzip();
        match select_threshold(&s, &z) {
            Some((theta, _)) => reference.threshold = theta.clamp(-1.0, 1.0),
            None => {
                log::warn!("type {ty}: cannot calibrate (one class or identical scores); using {DEFAULT_THRESHOLD}");
                reference.threshold = DEFAULT_THRESHOLD;
            }
        }
    }
    out
}
