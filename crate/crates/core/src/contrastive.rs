//! Supervised contrastive loss with hard and soft negatives.
//!
//! Anchors are correct views. For an anchor `i` of type `c`, positives are the
//! other correct views of `c`, hard negatives the incorrect views of `c`, and
//! soft negatives every view of another type.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::augment::ViewBatch;
use crate::error::{Error, Result};
use crate::skeleton::{Assessment, ExerciseType};

/// Index sets of a view batch.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BatchPartitions {
    pub beta_plus: Vec<usize>,
    pub beta_by_type: BTreeMap<ExerciseType, Vec<usize>>,
    pub beta_plus_by_type: BTreeMap<ExerciseType, Vec<usize>>,
    pub beta_minus_by_type: BTreeMap<ExerciseType, Vec<usize>>,
    /// Exercise type of every view.
    pub types: Vec<ExerciseType>,
}

impl BatchPartitions {
    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }
}

pub fn partition_labels(types: &[ExerciseType], assessments: &[Assessment]) -> Result<BatchPartitions> {
    if types.len() != assessments.len() {
        return Err(Error::Shape(format!(
            "{} exercise types but {} assessments",
            types.len(),
            assessments.len()
        )));
    }
    let mut p = BatchPartitions {
        types: types.to_vec(),
        ..BatchPartitions::default()
    };
    for (i, (ty, z)) in types.iter().zip(assessments).enumerate() {
        p.beta_by_type.entry(ty.clone()).or_default().push(i);
        let plus = p.beta_plus_by_type.entry(ty.clone()).or_default();
        let minus = p.beta_minus_by_type.entry(ty.clone()).or_default();
        if z.is_correct() {
            p.beta_plus.push(i);
            plus.push(i);
        } else {
            minus.push(i);
        }
    }
    Ok(p)
}

pub fn partition_batch(batch: &ViewBatch) -> BatchPartitions {
    partition_labels(&batch.exercise_type, &batch.assessment).expect("view batch labels are aligned")
}

pub fn cosine_sim(u: ArrayView1<'_, f64>, v: ArrayView1<'_, f64>) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Shape(format!("vectors of length {} and {}", u.len(), v.len())));
    }
    let nu = u.dot(&u).sqrt();
    let nv = v.dot(&v).sqrt();
    if nu == 0.0 {
        return Err(Error::ZeroNorm(0));
    }
    if nv == 0.0 {
        return Err(Error::ZeroNorm(1));
    }
    Ok((u.dot(&v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// Which views enter the second sum of the denominator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DenominatorMode {
    /// Every view other than the anchor; hard negatives enter twice.
    #[default]
    Literal,
    /// Only views of other exercise types.
    Prose,
}

impl DenominatorMode {
    pub fn name(self) -> &'static str {
        match self {
            DenominatorMode::Literal => "literal",
            DenominatorMode::Prose => "prose",
        }
    }
}

impl fmt::Display for DenominatorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DenominatorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(DenominatorMode::Literal),
            "prose" => Ok(DenominatorMode::Prose),
            _ => Err(Error::Usage(format!("unknown loss mode `{s}` (literal|prose)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    pub temperature: f64,
    pub denominator_mode: DenominatorMode,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            temperature: 0.1,
            denominator_mode: DenominatorMode::Literal,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::Argument(format!("temperature must be positive, got {}", self.temperature)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorDiagnostics {
    pub index: usize,
    pub positives: usize,
    pub hard_negatives: usize,
    pub soft_negatives: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossDiagnostics {
    pub anchors: usize,
    /// Anchors without a positive, or without any denominator term.
    pub skipped_anchors: usize,
    pub positives: usize,
    pub hard_negatives: usize,
    pub soft_negatives: usize,
    pub mean_anchor_loss: f64,
    pub per_anchor: Vec<AnchorDiagnostics>,
}

#[derive(Debug, Clone)]
pub struct LossOutput {
    pub loss: f64,
    /// `dL / d embeddings`, same shape as the input.
    pub gradient: Array2<f64>,
    pub diagnostics: LossDiagnostics,
}

fn normalize_rows(embeddings: ArrayView2<'_, f64>) -> Result<(Array2<f64>, Array1<f64>)> {
    let norms: Array1<f64> = embeddings.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect();
    if let Some(i) = norms.iter().position(|&n| !(n > 0.0 && n.is_finite())) {
        return Err(Error::ZeroNorm(i));
    }
    let unit = &embeddings / &norms.view().insert_axis(Axis(1));
    Ok((unit, norms))
}

/// Loss value, gradient with respect to the embeddings, and diagnostics.
///
/// The total is a plain sum over anchors. Each anchor contributes
/// `1/|P+_c| * sum_j [log D_i - s_ij / tau]` where `|P+_c|` counts all correct
/// views of its type (the anchor included) and `D_i` sums `exp(s_ik / tau)`
/// over hard negatives plus the second summation selected by the mode.
pub fn contrastive_loss(
    embeddings: ArrayView2<'_, f64>,
    partitions: &BatchPartitions,
    config: &LossConfig,
) -> Result<LossOutput> {
    config.validate()?;
    let n = embeddings.nrows();
    if n != partitions.len() {
        return Err(Error::Shape(format!("{n} embeddings for {} labelled views", partitions.len())));
    }
    if partitions.beta_plus.is_empty() {
        return Err(Error::NoAnchors);
    }
    let tau = config.temperature;
    let (unit, norms) = normalize_rows(embeddings)?;
    let sim = unit.dot(&unit.t());

    let mut d_sim = Array2::<f64>::zeros((n, n));
    let mut diag = LossDiagnostics::default();
    let mut loss = 0.0;
    let mut multiplicity = vec![0.0f64; n];
    let mut logits = vec![0.0f64; n];

    for &i in &partitions.beta_plus {
        let c = &partitions.types[i];
        let plus_c = &partitions.beta_plus_by_type[c];
        let minus_c = &partitions.beta_minus_by_type[c];
        let positives: Vec<usize> = plus_c.iter().copied().filter(|&j| j != i).collect();

        multiplicity.iter_mut().for_each(|m| *m = 0.0);
        for &k in minus_c {
            multiplicity[k] += 1.0;
        }
        let mut soft = 0;
        for l in 0..n {
            if l == i {
                continue;
            }
            let other_type = &partitions.types[l] != c;
            soft += other_type as usize;
            if config.denominator_mode == DenominatorMode::Literal || other_type {
                multiplicity[l] += 1.0;
            }
        }
        let record = AnchorDiagnostics {
            index: i,
            positives: positives.len(),
            hard_negatives: minus_c.len(),
            soft_negatives: soft,
        };
        let has_denominator = multiplicity.iter().any(|&m| m > 0.0);
        if positives.is_empty() || !has_denominator {
            log::warn!("anchor {i} has no positive or an empty denominator; skipped");
            diag.skipped_anchors += 1;
            diag.per_anchor.push(record);
            continue;
        }

        let row = sim.row(i);
        let mut max_logit = f64::NEG_INFINITY;
        for k in 0..n {
            logits[k] = row[k] / tau;
            if multiplicity[k] > 0.0 {
                max_logit = max_logit.max(logits[k]);
            }
        }
        let shifted_sum: f64 = (0..n)
            .filter(|&k| multiplicity[k] > 0.0)
            .map(|k| multiplicity[k] * (logits[k] - max_logit).exp())
            .sum();
        let log_d = max_logit + shifted_sum.ln();

        let w = 1.0 / plus_c.len() as f64;
        let p = positives.len() as f64;
        loss += w * positives.iter().map(|&j| log_d - logits[j]).sum::<f64>();

        let mut grad_row = d_sim.row_mut(i);
        for k in 0..n {
            if multiplicity[k] > 0.0 {
                let softmax = multiplicity[k] * (logits[k] - max_logit).exp() / shifted_sum;
                grad_row[k] += w * p * softmax / tau;
            }
        }
        for &j in &positives {
            grad_row[j] -= w / tau;
        }

        diag.anchors += 1;
        diag.positives += record.positives;
        diag.hard_negatives += record.hard_negatives;
        diag.soft_negatives += record.soft_negatives;
        diag.per_anchor.push(record);
    }
    diag.mean_anchor_loss = if diag.anchors > 0 { loss / diag.anchors as f64 } else { 0.0 };

    // s_ik = u_i . u_k, so dL/dU = (G + G^T) U; then through u = v / |v|.
    let sym = &d_sim + &d_sim.t();
    let d_unit = sym.dot(&unit);
    let mut gradient = Array2::zeros((n, embeddings.ncols()));
    for (((mut g, du), u), &norm) in gradient
        .rows_mut()
        .into_iter()
        .zip(d_unit.rows())
        .zip(unit.rows())
        .zip(norms.iter())
    {
        let radial = u.dot(&du);
        g.assign(&((&du - &(&u * radial)) / norm));
    }

    Ok(LossOutput {
        loss,
        gradient,
        diagnostics: diag,
    })
}
