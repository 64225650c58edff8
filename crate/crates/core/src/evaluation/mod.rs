//! Metrics, per-exercise reports, cross-validation and embedding export.

pub mod metrics;
mod svm;
mod tsne;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use metrics::{accuracy, auc_pr, auc_roc, average_ranks, mean_squared_error, spearman};
pub use svm::{svm_probe, RbfSvm, SvmConfig};
pub use tsne::{tsne, TsneConfig};

use crate::error::{Error, Result};
use crate::inference::{
    build_reference_set, calibrate_thresholds, classify, represent_dataset, score_dataset, ReferenceOptions,
    ReferenceSet,
};
use crate::model::{EncoderConfig, HeadMode, ModelState, ProjectionConfig};
use crate::skeleton::{split_indices, Assessment, Dataset, ExerciseType, SplitOptions, SplitScheme};
use crate::training::{train_contrastive, TrainConfig};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TypeMetrics {
    pub accuracy: Option<f64>,
    pub auc_roc: Option<f64>,
    pub auc_pr: Option<f64>,
    pub sample_count: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MacroMetrics {
    pub accuracy: Option<f64>,
    pub auc_roc: Option<f64>,
    pub auc_pr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_exercise: BTreeMap<ExerciseType, TypeMetrics>,
    pub macro_average: MacroMetrics,
    pub protocol: Option<SplitScheme>,
    pub seed: u64,
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

impl EvalReport {
    pub fn from_per_exercise(
        per_exercise: BTreeMap<ExerciseType, TypeMetrics>,
        protocol: Option<SplitScheme>,
        seed: u64,
    ) -> Self {
        let macro_average = MacroMetrics {
            accuracy: mean_of(per_exercise.values().map(|m| m.accuracy)),
            auc_roc: mean_of(per_exercise.values().map(|m| m.auc_roc)),
            auc_pr: mean_of(per_exercise.values().map(|m| m.auc_pr)),
        };
        EvalReport {
            per_exercise,
            macro_average,
            protocol,
            seed,
        }
    }

    /// Per-type means across folds; sample counts are summed.
    pub fn merge_folds(folds: &[EvalReport]) -> Option<EvalReport> {
        let first = folds.first()?;
        let mut types: BTreeMap<ExerciseType, Vec<&TypeMetrics>> = BTreeMap::new();
        for f in folds {
            for (ty, m) in &f.per_exercise {
                types.entry(ty.clone()).or_default().push(m);
            }
        }
        let per_exercise = types
            .into_iter()
            .map(|(ty, ms)| {
                let merged = TypeMetrics {
                    accuracy: mean_of(ms.iter().map(|m| m.accuracy)),
                    auc_roc: mean_of(ms.iter().map(|m| m.auc_roc)),
                    auc_pr: mean_of(ms.iter().map(|m| m.auc_pr)),
                    sample_count: ms.iter().map(|m| m.sample_count).sum(),
                    notes: ms.iter().flat_map(|m| m.notes.iter().cloned()).collect(),
                };
                (ty, merged)
            })
            .collect();
        Some(EvalReport::from_per_exercise(per_exercise, first.protocol, first.seed))
    }

    /// Aligned text table: one row per exercise type, then the average.
    pub fn to_table(&self) -> String {
        let cell = |v: Option<f64>| v.map_or_else(|| "n/a".to_owned(), |x| format!("{x:.4}"));
        let width = self
            .per_exercise
            .keys()
            .map(|k| k.as_str().len())
            .chain(["average".len(), "exercise".len()])
            .max()
            .unwrap_or(8);
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$}  {:>8}  {:>8}  {:>8}  {:>7}", "exercise", "accuracy", "auc_roc", "auc_pr", "samples");
        for (ty, m) in &self.per_exercise {
            let _ = writeln!(
                out,
                "{:<width$}  {:>8}  {:>8}  {:>8}  {:>7}",
                ty.as_str(),
                cell(m.accuracy),
                cell(m.auc_roc),
                cell(m.auc_pr),
                m.sample_count
            );
        }
        let total: usize = self.per_exercise.values().map(|m| m.sample_count).sum();
        let a = &self.macro_average;
        let _ = writeln!(
            out,
            "{:<width$}  {:>8}  {:>8}  {:>8}  {:>7}",
            "average",
            cell(a.accuracy),
            cell(a.auc_roc),
            cell(a.auc_pr),
            total
        );
        out
    }
}

/// Metrics of one exercise type from scores and thresholded decisions.
pub fn type_metrics(scores: &[f64], truth: &[Assessment], threshold: f64) -> TypeMetrics {
    let mut notes = Vec::new();
    let mut keep = |r: Result<f64>| match r {
        Ok(v) => Some(v),
        Err(e) => {
            notes.push(e.to_string());
            None
        }
    };
    let predictions: Vec<Assessment> = scores.iter().map(|&s| classify(s, threshold)).collect();
    let accuracy = keep(accuracy(&predictions, truth));
    let auc_roc = keep(auc_roc(scores, truth));
    let auc_pr = keep(auc_pr(scores, truth));
    TypeMetrics {
        accuracy,
        auc_roc,
        auc_pr,
        sample_count: truth.len(),
        notes,
    }
}

pub fn evaluate(
    state: &ModelState,
    refs: &ReferenceSet,
    data: &Dataset,
    protocol: Option<SplitScheme>,
    seed: u64,
) -> Result<EvalReport> {
    if !data.is_binary() {
        return Err(Error::Argument(format!("dataset {} has no binary assessments", data.name)));
    }
    let scores = score_dataset(state, refs, data)?;
    Ok(report_from_scores(refs, data, &scores, protocol, seed))
}

pub fn report_from_scores(
    refs: &ReferenceSet,
    data: &Dataset,
    scores: &[f64],
    protocol: Option<SplitScheme>,
    seed: u64,
) -> EvalReport {
    let mut grouped: BTreeMap<ExerciseType, (Vec<f64>, Vec<Assessment>)> = BTreeMap::new();
    for (s, &score) in data.samples().iter().zip(scores) {
        if let Some(a) = s.label.assessment() {
            let e = grouped.entry(s.exercise_type.clone()).or_default();
            e.0.push(score);
            e.1.push(a);
        }
    }
    let per_exercise = grouped
        .into_iter()
        .map(|(ty, (s, z))| {
            let theta = refs.threshold(&ty).unwrap_or(crate::inference::DEFAULT_THRESHOLD);
            (ty, type_metrics(&s, &z, theta))
        })
        .collect();
    EvalReport::from_per_exercise(per_exercise, protocol, seed)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossValidation {
    pub folds: Vec<EvalReport>,
    pub summary: EvalReport,
}

/// Trains, builds calibrated references and evaluates on every fold.
pub fn cross_validate(
    data: &Dataset,
    scheme: SplitScheme,
    split_seed: u64,
    encoder: &EncoderConfig,
    projection: ProjectionConfig,
    train: &TrainConfig,
    reference: &ReferenceOptions,
) -> Result<CrossValidation> {
    let folds = split_indices(data, scheme, split_seed, SplitOptions::default())?;
    let mut reports = Vec::with_capacity(folds.len());
    for (k, fold) in folds.iter().enumerate() {
        let (tr, va) = (data.subset(&fold.train), data.subset(&fold.validation));
        let state = ModelState::new(encoder.clone(), projection, data.graph().clone(), train.seed)?;
        let outcome = train_contrastive(state, &tr, train, &mut |rec, _| {
            log::debug!("fold {k} epoch {} loss {:.5}", rec.epoch, rec.loss);
            Ok(())
        })?;
        let refs = build_reference_set(&outcome.state, &tr, reference)?;
        let refs = calibrate_thresholds(&outcome.state, &refs, &tr)?;
        let covered: Vec<usize> = (0..va.len())
            .filter(|&i| refs.references.contains_key(&va.samples()[i].exercise_type))
            .collect();
        reports.push(evaluate(&outcome.state, &refs, &va.subset(&covered), Some(scheme), split_seed)?);
    }
    let summary = EvalReport::merge_folds(&reports).expect("at least one fold");
    Ok(CrossValidation { folds: reports, summary })
}

/// Writes a tab-separated table of representations.
///
/// Columns: `id`, `exercise_type`, `assessment`, optionally `proj_0` and
/// `proj_1`, then `e0..`. With `references`, one row per reference follows
/// the samples, with id `reference:<type>` and assessment `ref`.
pub fn export_embeddings(
    state: &ModelState,
    data: &Dataset,
    head_mode: HeadMode,
    references: Option<&ReferenceSet>,
    projection: Option<&TsneConfig>,
    out: &Path,
) -> Result<()> {
    let reps = represent_dataset(state, data, head_mode)?;
    let mut rows: Vec<(String, String, String)> = data
        .samples()
        .iter()
        .map(|s| {
            let label = match s.label {
                crate::skeleton::Label::Binary(a) => a.symbol().to_owned(),
                crate::skeleton::Label::Clinical(v) => format!("{v}"),
            };
            (s.id.clone(), s.exercise_type.to_string(), label)
        })
        .collect();
    let mut matrix = reps;
    if let Some(refs) = references {
        if refs.head_mode != head_mode {
            return Err(Error::Argument(format!(
                "references were built in {} mode, export requested {}",
                refs.head_mode, head_mode
            )));
        }
        for (ty, r) in &refs.references {
            if r.vector.len() != matrix.ncols() {
                return Err(Error::Shape("reference width differs from representations".into()));
            }
            matrix.push_row(ndarray::ArrayView1::from(&r.vector[..])).expect("width checked");
            rows.push((format!("reference:{ty}"), ty.to_string(), "ref".to_owned()));
        }
    }
    let projected = projection.map(|cfg| tsne(matrix.view(), cfg));

    let mut text = String::from("id\texercise_type\tassessment");
    if let Some(p) = &projected {
        for k in 0..p.ncols() {
            let _ = write!(text, "\tproj_{k}");
        }
    }
    for k in 0..matrix.ncols() {
        let _ = write!(text, "\te{k}");
    }
    text.push('\n');
    for (i, (id, ty, label)) in rows.iter().enumerate() {
        let _ = write!(text, "{id}\t{ty}\t{label}");
        if let Some(p) = &projected {
            for v in p.row(i) {
                let _ = write!(text, "\t{v}");
            }
        }
        for v in matrix.row(i) {
            let _ = write!(text, "\t{v}");
        }
        text.push('\n');
    }
    if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = std::fs::File::create(out).map_err(|e| Error::io(out, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(out, e))
}
