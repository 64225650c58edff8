//! Contrastive pre-training and transfer to clinical-score regression.

mod optim;

use std::time::Instant;

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use optim::{Adam, Optimizer};

use crate::augment::{build_two_view_batch, AugmentationConfig};
use crate::contrastive::{contrastive_loss, partition_batch, LossConfig};
use crate::error::{Error, Result};
use crate::evaluation::metrics::{mean_squared_error, spearman};
use crate::model::{stack_sequences, Head, HeadSpec, ModelState, Module, RegressionHeadConfig};
use crate::skeleton::{Dataset, Label, LabeledSample, CLINICAL_SCORE_MAX};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Source tuples per batch; each yields two views.
    pub batch_tuples: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub adam_betas: (f64, f64),
    pub seed: u64,
    pub augmentation: AugmentationConfig,
    /// Interpret `augmentation.noise_sigma` relative to the data's RMS coordinate.
    pub relative_noise: bool,
    pub loss: LossConfig,
    /// Epoch interval for the observer's checkpoint flag; 0 disables it.
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 2000,
            batch_tuples: 128,
            learning_rate: 1e-3,
            optimizer: Optimizer::Adam,
            adam_betas: (0.9, 0.999),
            seed: 0,
            augmentation: AugmentationConfig::default(),
            relative_noise: true,
            loss: LossConfig::default(),
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_tuples == 0 {
            return Err(Error::Argument("epochs and batch_tuples must be positive".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Argument(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        let (b1, b2) = self.adam_betas;
        if !((0.0..1.0).contains(&b1) && (0.0..1.0).contains(&b2)) {
            return Err(Error::Argument("Adam betas must lie in [0, 1)".into()));
        }
        self.augmentation.validate()?;
        self.loss.validate()
    }

    fn optimizer(&self) -> Adam {
        match self.optimizer {
            Optimizer::Adam => Adam::new(self.learning_rate, self.adam_betas),
        }
    }
}

/// One line of the contrastive training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean batch loss over the batches that had anchors.
    pub loss: f64,
    pub mean_anchor_loss: f64,
    pub batches: usize,
    pub skipped_batches: usize,
    pub anchors: usize,
    pub skipped_anchors: usize,
    pub positives: usize,
    pub hard_negatives: usize,
    pub soft_negatives: usize,
    pub elapsed_ms: u64,
    /// Set on epochs where a checkpoint is due.
    pub checkpoint_due: bool,
}

pub type EpochObserver<'a, R> = dyn FnMut(&R, &ModelState) -> Result<()> + 'a;

pub struct TrainOutcome<R> {
    pub state: ModelState,
    pub log: Vec<R>,
}

/// Minimizes the contrastive loss over encoder and projection head jointly.
pub fn train_contrastive(
    mut state: ModelState,
    data: &Dataset,
    config: &TrainConfig,
    observer: &mut EpochObserver<'_, EpochRecord>,
) -> Result<TrainOutcome<EpochRecord>> {
    config.validate()?;
    state.ensure_graph(data.graph())?;
    state.projection_head()?;
    let samples: Vec<&LabeledSample> = data.samples().iter().collect();
    if let Some(s) = samples.iter().find(|s| s.label.assessment().is_none()) {
        return Err(Error::Argument(format!("sample {} has no binary assessment", s.id)));
    }
    let correct = samples.iter().filter(|s| s.is_correct()).count();
    if correct < 2 {
        return Err(Error::InsufficientCorrect(format!(
            "training needs at least 2 correct samples, dataset has {correct}"
        )));
    }
    if data.exercise_types().len() < 2 {
        log::warn!("single exercise type: batches contain no soft negatives");
    }
    let augmentation = if config.relative_noise {
        config.augmentation.with_noise_scale(data.coordinate_scale())
    } else {
        config.augmentation.clone()
    };

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut augment_rng = ChaCha8Rng::seed_from_u64(config.seed ^ config.augmentation.rng_seed.rotate_left(32) ^ 0x5eed);
    let mut adam = config.optimizer();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut log = Vec::with_capacity(config.epochs);
    let start_epoch = state.meta.epoch;
    state.meta.seed = config.seed;
    state.meta.source_dataset = data.name.clone();

    for epoch in 1..=config.epochs {
        let started = Instant::now();
        order.shuffle(&mut shuffle_rng);
        let mut rec = EpochRecord {
            epoch: start_epoch + epoch,
            loss: 0.0,
            mean_anchor_loss: 0.0,
            batches: 0,
            skipped_batches: 0,
            anchors: 0,
            skipped_anchors: 0,
            positives: 0,
            hard_negatives: 0,
            soft_negatives: 0,
            elapsed_ms: 0,
            checkpoint_due: config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0,
        };
        let mut anchor_loss_sum = 0.0;
        for (batch_idx, chunk) in order.chunks(config.batch_tuples).enumerate() {
            if chunk.len() < 2 {
                continue;
            }
            let tuples: Vec<&LabeledSample> = chunk.iter().map(|&i| samples[i]).collect();
            let batch = build_two_view_batch(&tuples, &augmentation, &mut augment_rng)?;
            let parts = partition_batch(&batch);
            if parts.beta_plus.is_empty() {
                log::info!("epoch {}: batch {batch_idx} has no correct views; skipped", rec.epoch);
                rec.skipped_batches += 1;
                continue;
            }
            state.zero_grad();
            let (embeddings, cache) = state.encoder.forward_train(batch.views.view())?;
            let Head::Projection(head) = &mut state.head else {
                unreachable!("checked above")
            };
            let projected = head.forward(embeddings.view())?;
            let out = match contrastive_loss(projected.view(), &parts, &config.loss) {
                Ok(out) => out,
                Err(Error::ZeroNorm(i)) => {
                    return Err(Error::NonFiniteLoss {
                        epoch: rec.epoch,
                        batch: batch_idx,
                        detail: format!("projection of view {i} collapsed to zero"),
                    })
                }
                Err(e) => return Err(e),
            };
            if !out.loss.is_finite() || out.gradient.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss {
                    epoch: rec.epoch,
                    batch: batch_idx,
                    detail: format!(
                        "loss {} with {} anchors; embedding norm range {:?}",
                        out.loss,
                        out.diagnostics.anchors,
                        norm_range(&projected)
                    ),
                });
            }
            let d_embed = head.backward(embeddings.view(), out.gradient.view());
            state.encoder.backward(cache, &d_embed);
            adam.step(&mut state);

            let d = &out.diagnostics;
            rec.batches += 1;
            rec.loss += out.loss;
            anchor_loss_sum += d.mean_anchor_loss;
            rec.anchors += d.anchors;
            rec.skipped_anchors += d.skipped_anchors;
            rec.positives += d.positives;
            rec.hard_negatives += d.hard_negatives;
            rec.soft_negatives += d.soft_negatives;
        }
        if rec.batches > 0 {
            rec.loss /= rec.batches as f64;
            rec.mean_anchor_loss = anchor_loss_sum / rec.batches as f64;
        }
        state.meta.epoch = rec.epoch;
        rec.elapsed_ms = started.elapsed().as_millis() as u64;
        observer(&rec, &state)?;
        log.push(rec);
    }
    Ok(TrainOutcome { state, log })
}

fn norm_range(x: &Array2<f64>) -> (f64, f64) {
    x.rows()
        .into_iter()
        .map(|r| r.dot(&r).sqrt())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), n| (lo.min(n), hi.max(n)))
}

/// Where the regression model's encoder comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderInit {
    Pretrained,
    FromScratch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionEpoch {
    pub epoch: usize,
    pub train_mse: f64,
    pub validation_mse: Option<f64>,
    pub validation_spearman: Option<f64>,
    pub elapsed_ms: u64,
}

fn clinical_targets(data: &Dataset) -> Result<Vec<f64>> {
    data.samples()
        .iter()
        .map(|s| match s.label {
            Label::Clinical(v) => Ok(v),
            Label::Binary(_) => Err(Error::RegressionTargetRequired(data.name.clone())),
        })
        .collect()
}

/// Replaces the projection head with a fresh regression head and fits it to
/// clinical scores by mean squared error. Targets are divided by the score
/// maximum during optimization.
pub fn transfer_to_regression(
    pretrained: &ModelState,
    train: &Dataset,
    validation: Option<&Dataset>,
    head: RegressionHeadConfig,
    init: EncoderInit,
    config: &TrainConfig,
    observer: &mut EpochObserver<'_, RegressionEpoch>,
) -> Result<TrainOutcome<RegressionEpoch>> {
    config.validate()?;
    pretrained.ensure_graph(train.graph())?;
    let targets = clinical_targets(train)?;
    let val_targets = validation.map(clinical_targets).transpose()?;
    if let Some(v) = validation {
        pretrained.ensure_graph(v.graph())?;
    }
    if train.len() < 2 {
        return Err(Error::Argument("regression needs at least two training samples".into()));
    }
    if train.exercise_types().len() > 1 {
        log::warn!("regression target spans several exercise types");
    }
    let head = RegressionHeadConfig {
        in_dim: pretrained.encoder.embedding_dim(),
        freeze_encoder: head.freeze_encoder && init == EncoderInit::Pretrained,
        ..head
    };
    let freeze = head.freeze_encoder;
    let mut state = ModelState::from_spec(
        pretrained.encoder_config().clone(),
        &HeadSpec::Regression(head),
        pretrained.graph.clone(),
        config.seed,
    )?;
    if init == EncoderInit::Pretrained {
        state.encoder = pretrained.encoder.clone();
    }
    state.meta.freeze_encoder = freeze;
    state.meta.source_dataset = train.name.clone();
    state.meta.seed = config.seed;

    let views = stack_sequences(&train.samples().iter().map(|s| &s.sequence).collect::<Vec<_>>())?;
    let frozen_embeddings = if freeze { Some(state.encode(views.view())?) } else { None };
    let scaled: Array1<f64> = targets.iter().map(|t| t / CLINICAL_SCORE_MAX).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut head_adam = config.optimizer();
    let mut full_adam = config.optimizer();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut log = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        let mut sq_err = 0.0;
        let mut seen = 0usize;
        for chunk in order.chunks(config.batch_tuples) {
            if chunk.len() < 2 {
                continue;
            }
            state.zero_grad();
            let y = scaled.select(Axis(0), chunk);
            let Head::Regression(reg) = &mut state.head else {
                unreachable!("built with a regression head")
            };
            match &frozen_embeddings {
                Some(emb) => {
                    let x = emb.select(Axis(0), chunk);
                    let (pred, cache) = reg.forward_cached(x.view())?;
                    let diff = &pred - &y;
                    sq_err += diff.dot(&diff);
                    reg.backward(cache, &(diff * (2.0 / chunk.len() as f64)));
                    head_adam.step(reg);
                }
                None => {
                    let x = views.select(Axis(0), chunk);
                    let (emb, enc_cache) = state.encoder.forward_train(x.view())?;
                    let (pred, cache) = reg.forward_cached(emb.view())?;
                    let diff = &pred - &y;
                    sq_err += diff.dot(&diff);
                    let d_emb = reg.backward(cache, &(diff * (2.0 / chunk.len() as f64)));
                    state.encoder.backward(enc_cache, &d_emb);
                    full_adam.step(&mut state);
                }
            }
            seen += chunk.len();
        }
        if !sq_err.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                batch: 0,
                detail: "regression loss diverged".into(),
            });
        }
        let train_mse = sq_err / seen.max(1) as f64 * CLINICAL_SCORE_MAX * CLINICAL_SCORE_MAX;
        let (validation_mse, validation_spearman) = match (validation, &val_targets) {
            (Some(v), Some(t)) if !v.is_empty() => {
                let pred = predict_scores(&state, v)?;
                (Some(mean_squared_error(&pred, t)?), spearman(&pred, t).ok())
            }
            _ => (None, None),
        };
        state.meta.epoch = epoch;
        let rec = RegressionEpoch {
            epoch,
            train_mse,
            validation_mse,
            validation_spearman,
            elapsed_ms: started.elapsed().as_millis() as u64,
        };
        observer(&rec, &state)?;
        log.push(rec);
    }
    Ok(TrainOutcome { state, log })
}

/// Predicted clinical scores on the published scale, clamped to `[0, 50]`.
pub fn predict_scores(state: &ModelState, data: &Dataset) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Ok(Vec::new());
    }
    let seqs: Vec<_> = data.samples().iter().map(|s| &s.sequence).collect();
    let mut out = Vec::with_capacity(seqs.len());
    for chunk in seqs.chunks(64) {
        let raw = state.regress(stack_sequences(chunk)?.view())?;
        out.extend(raw.iter().map(|v| (v * CLINICAL_SCORE_MAX).clamp(0.0, CLINICAL_SCORE_MAX)));
    }
    Ok(out)
}
