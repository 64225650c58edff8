mod common;

use rehab_contrast::model::{
    checkpoint_id, decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, EncoderConfig, HeadSpec,
    ModelState, ProjectionConfig, RegressionHeadConfig, CHECKPOINT_VERSION,
};
use rehab_contrast::synthetic::synthetic_graph;
use rehab_contrast::Error;

use common::snapshot;

fn model() -> ModelState {
    let mut enc = EncoderConfig::tiny(vec![4, 6]);
    enc.use_ri = true;
    ModelState::new(enc, ProjectionConfig { in_dim: 6, out_dim: 5 }, synthetic_graph(), 11).unwrap()
}

#[test]
fn round_trip_preserves_everything() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    let mut state = model();
    state.meta.epoch = 17;
    state.meta.source_dataset = "synthetic".into();
    let id = save_checkpoint(&state, &path).unwrap();
    assert_eq!(id, checkpoint_id(&path).unwrap());
    assert_eq!(id.len(), 64);

    let loaded = load_checkpoint(&path).unwrap();
    assert_eq!(snapshot(&loaded), snapshot(&state));
    assert_eq!(loaded.encoder_config(), state.encoder_config());
    assert_eq!(loaded.head_spec(), state.head_spec());
    assert_eq!(loaded.meta, state.meta);
    assert_eq!(loaded.graph, state.graph);
}

#[test]
fn regression_head_round_trips() {
    let head = HeadSpec::Regression(RegressionHeadConfig { in_dim: 6, hidden_dim: 3, freeze_encoder: false });
    let state = ModelState::from_spec(EncoderConfig::tiny(vec![4, 6]), &head, synthetic_graph(), 2).unwrap();
    let back = decode_checkpoint(&encode_checkpoint(&state).unwrap()).unwrap();
    assert_eq!(back.head_spec(), head);
    assert_eq!(snapshot(&back), snapshot(&state));
}

#[test]
fn encoding_is_deterministic() {
    let state = model();
    assert_eq!(encode_checkpoint(&state).unwrap(), encode_checkpoint(&state).unwrap());
}

#[test]
fn truncation_is_detected() {
    let bytes = encode_checkpoint(&model()).unwrap();
    for cut in [0, 3, 10, bytes.len() / 2, bytes.len() - 1] {
        assert!(decode_checkpoint(&bytes[..cut]).is_err(), "cut at {cut}");
    }
}

#[test]
fn flipped_payload_bit_is_corrupt() {
    let mut bytes = encode_checkpoint(&model()).unwrap();
    let at = bytes.len() - 40;
    bytes[at] ^= 0x01;
    assert!(matches!(decode_checkpoint(&bytes), Err(Error::Corrupt(_))));
}

#[test]
fn other_versions_are_refused() {
    let mut bytes = encode_checkpoint(&model()).unwrap();
    bytes[4..8].copy_from_slice(&(CHECKPOINT_VERSION + 1).to_le_bytes());
    match decode_checkpoint(&bytes) {
        Err(Error::UnsupportedVersion { found, expected }) => {
            assert_eq!((found, expected), (CHECKPOINT_VERSION + 1, CHECKPOINT_VERSION));
        }
        other => panic!("expected a version error, got {other:?}"),
    }
}

#[test]
fn wrong_magic_is_corrupt() {
    let mut bytes = encode_checkpoint(&model()).unwrap();
    bytes[0] = b'X';
    assert!(matches!(decode_checkpoint(&bytes), Err(Error::Corrupt(_))));
}
