mod common;

use rehab_contrast::model::{EncoderConfig, Head, ModelState, ProjectionConfig, RegressionHeadConfig};
use rehab_contrast::skeleton::Dataset;
use rehab_contrast::synthetic::{generate_binary, generate_regression, SyntheticConfig};
use rehab_contrast::training::{
    predict_scores, train_contrastive, transfer_to_regression, EncoderInit, EpochRecord, TrainConfig,
};
use rehab_contrast::Error;

use common::snapshot;

fn small_data(seed: u64) -> Dataset {
    generate_binary(&SyntheticConfig { frames: 16, samples_per_type: 8, seed, ..Default::default() }).unwrap()
}

fn small_model(seed: u64) -> ModelState {
    let mut enc = EncoderConfig::tiny(vec![4, 6]);
    enc.temporal_kernel = 3;
    let graph = rehab_contrast::synthetic::synthetic_graph();
    ModelState::new(enc, ProjectionConfig { in_dim: 6, out_dim: 4 }, graph, seed).unwrap()
}

fn config(seed: u64) -> TrainConfig {
    TrainConfig { epochs: 3, batch_tuples: 8, seed, ..Default::default() }
}

fn strip_timing(log: &[EpochRecord]) -> Vec<EpochRecord> {
    log.iter().cloned().map(|r| EpochRecord { elapsed_ms: 0, ..r }).collect()
}

#[test]
fn same_seed_same_run() {
    let data = small_data(0);
    let a = train_contrastive(small_model(1), &data, &config(5), &mut |_, _| Ok(())).unwrap();
    let b = train_contrastive(small_model(1), &data, &config(5), &mut |_, _| Ok(())).unwrap();
    assert_eq!(strip_timing(&a.log), strip_timing(&b.log));
    assert_eq!(snapshot(&a.state), snapshot(&b.state));

    let c = train_contrastive(small_model(1), &data, &config(6), &mut |_, _| Ok(())).unwrap();
    assert_ne!(snapshot(&a.state), snapshot(&c.state));
}

#[test]
fn log_has_one_record_per_epoch() {
    let data = small_data(0);
    let mut seen = Vec::new();
    let out = train_contrastive(small_model(0), &data, &config(0), &mut |r, s| {
        assert!(s.is_finite());
        seen.push(r.epoch);
        Ok(())
    })
    .unwrap();
    assert_eq!(seen, vec![1, 2, 3]);
    assert_eq!(out.log.len(), 3);
    // 24 tuples in chunks of 8.
    assert!(out.log.iter().all(|r| r.batches + r.skipped_batches == 3 && r.loss.is_finite()));
    assert_eq!(out.state.meta.epoch, 3);
}

#[test]
fn observer_errors_stop_training() {
    let data = small_data(0);
    let result = train_contrastive(small_model(0), &data, &config(0), &mut |r, _| {
        if r.epoch == 2 {
            Err(Error::Argument("stop".into()))
        } else {
            Ok(())
        }
    });
    assert!(matches!(result, Err(Error::Argument(m)) if m == "stop"));
}

#[test]
fn single_type_trains_without_soft_negatives() {
    let data = small_data(0);
    let one = data.filter_type(&"s02".into());
    let out = train_contrastive(small_model(0), &one, &config(0), &mut |_, _| Ok(())).unwrap();
    assert!(out.log.iter().all(|r| r.soft_negatives == 0 && r.anchors > 0));
}

#[test]
fn clinical_labels_are_refused_for_contrastive_training() {
    let reg = generate_regression(&SyntheticConfig { frames: 16, samples_per_type: 6, ..Default::default() }, 1).unwrap();
    assert!(train_contrastive(small_model(0), &reg, &config(0), &mut |_, _| Ok(())).is_err());
}

fn regression_data() -> (Dataset, Dataset) {
    let reg = generate_regression(&SyntheticConfig { frames: 16, samples_per_type: 12, ..Default::default() }, 0).unwrap();
    let idx: Vec<usize> = (0..reg.len()).collect();
    (reg.subset(&idx[..9]), reg.subset(&idx[9..]))
}

#[test]
fn frozen_transfer_leaves_encoder_untouched() {
    let (train, val) = regression_data();
    let pretrained = small_model(3);
    let head = RegressionHeadConfig { in_dim: 6, hidden_dim: 5, freeze_encoder: true };
    let out = transfer_to_regression(&pretrained, &train, Some(&val), head, EncoderInit::Pretrained, &config(0), &mut |_, _| {
        Ok(())
    })
    .unwrap();
    let encoder_only = |s: &ModelState| {
        snapshot(s).into_iter().filter(|(n, _)| n.starts_with("encoder.")).collect::<Vec<_>>()
    };
    assert_eq!(encoder_only(&out.state), encoder_only(&pretrained));
    assert!(matches!(out.state.head, Head::Regression(_)));
    assert!(out.state.meta.freeze_encoder);
    assert!(out.log.iter().all(|r| r.validation_mse.is_some()));

    let scores = predict_scores(&out.state, &val).unwrap();
    assert_eq!(scores.len(), val.len());
    assert!(scores.iter().all(|s| (0.0..=50.0).contains(s)));
}

#[test]
fn fine_tuning_moves_the_encoder() {
    let (train, _) = regression_data();
    let pretrained = small_model(3);
    let head = RegressionHeadConfig { in_dim: 6, hidden_dim: 5, freeze_encoder: false };
    let out = transfer_to_regression(&pretrained, &train, None, head, EncoderInit::Pretrained, &config(0), &mut |_, _| Ok(()))
        .unwrap();
    let weight = |s: &ModelState| snapshot(s).into_iter().find(|(n, _)| n == "encoder.block0.gcn.weight").unwrap();
    assert_ne!(weight(&out.state), weight(&pretrained));
}

#[test]
fn from_scratch_never_freezes() {
    let (train, _) = regression_data();
    let head = RegressionHeadConfig { in_dim: 6, hidden_dim: 5, freeze_encoder: true };
    let out = transfer_to_regression(&small_model(3), &train, None, head, EncoderInit::FromScratch, &config(0), &mut |_, _| {
        Ok(())
    })
    .unwrap();
    assert!(!out.state.meta.freeze_encoder);
}

#[test]
fn binary_labels_are_refused_for_regression() {
    let data = small_data(0);
    let head = RegressionHeadConfig { in_dim: 6, hidden_dim: 5, freeze_encoder: true };
    let result =
        transfer_to_regression(&small_model(0), &data, None, head, EncoderInit::Pretrained, &config(0), &mut |_, _| Ok(()));
    assert!(matches!(result, Err(Error::RegressionTargetRequired(_))));
}
