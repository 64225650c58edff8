//! Generated exercise recordings with known structure, for tests and demos.
//!
//! An 8-joint stick figure performs one of three movements. Correct
//! executions use full, symmetric amplitude; incorrect ones are either
//! uniformly shallow or lopsided. Every sample also varies in body size,
//! facing direction, timing and sensor noise.

use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::skeleton::{Assessment, Dataset, Label, LabeledSample, SkeletonGraph, SkeletonSequence, CLINICAL_SCORE_MAX};

pub const SYNTHETIC_JOINTS: usize = 8;
pub const SYNTHETIC_TYPES: [&str; 3] = ["s01", "s02", "s03"];

/// Pelvis (root), spine, head, left elbow, left hand, right elbow, right hand, foot.
pub fn synthetic_graph() -> SkeletonGraph {
    SkeletonGraph::new(SYNTHETIC_JOINTS, vec![(0, 1), (1, 2), (1, 3), (3, 4), (1, 5), (5, 6), (0, 7)], 0)
        .expect("static synthetic graph is valid")
}

const REST_POSE: [[f64; 3]; SYNTHETIC_JOINTS] = [
    [0.0, 0.0, 0.0],
    [0.0, 0.5, 0.0],
    [0.0, 0.8, 0.0],
    [-0.25, 0.45, 0.0],
    [-0.45, 0.3, 0.0],
    [0.25, 0.45, 0.0],
    [0.45, 0.3, 0.0],
    [0.0, -0.9, 0.0],
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub frames: usize,
    pub samples_per_type: usize,
    /// Share of incorrect samples per type.
    pub incorrect_fraction: f64,
    /// Standard deviation of additive coordinate noise.
    pub noise: f64,
    /// Maximum facing-direction change about the vertical axis, degrees.
    pub max_yaw_degrees: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            frames: 32,
            samples_per_type: 60,
            incorrect_fraction: 0.5,
            noise: 0.02,
            max_yaw_degrees: 10.0,
            seed: 0,
        }
    }
}

/// Left and right movement amplitudes.
#[derive(Debug, Clone, Copy)]
struct Amplitude {
    left: f64,
    right: f64,
}

fn render(kind: usize, amp: Amplitude, cfg: &SyntheticConfig, rng: &mut ChaCha8Rng) -> Array3<f64> {
    let t_len = cfg.frames;
    let size = rng.random_range(0.9..1.1);
    let yaw = rng.random_range(-cfg.max_yaw_degrees..=cfg.max_yaw_degrees).to_radians();
    let shift = rng.random_range(-0.08..0.08);
    let noise = Normal::new(0.0, cfg.noise.max(0.0)).expect("valid noise");
    let (sin_y, cos_y) = yaw.sin_cos();
    let mut frames = Array3::zeros((t_len, SYNTHETIC_JOINTS, 3));
    for t in 0..t_len {
        let u = t as f64 / (t_len - 1) as f64;
        let s = (std::f64::consts::PI * (u + shift)).sin().max(0.0);
        let mut pose = REST_POSE;
        let (l, r) = (amp.left * s, amp.right * s);
        match kind {
            0 => {
                pose[3][1] += 0.3 * l;
                pose[4][1] += 0.6 * l;
                pose[5][1] += 0.3 * r;
                pose[6][1] += 0.6 * r;
            }
            1 => {
                let m = 0.5 * (l + r);
                pose[7][1] += 0.4 * m;
                pose[7][2] += 0.2 * m;
                pose[1][2] += 0.15 * m;
                pose[2][2] += 0.25 * m;
                pose[4][2] += 0.35 * l;
                pose[6][2] += 0.35 * r;
            }
            _ => {
                pose[3][0] -= 0.2 * l;
                pose[4][0] -= 0.4 * l;
                pose[5][0] += 0.2 * r;
                pose[6][0] += 0.4 * r;
                pose[2][0] += 0.1 * (r - l);
            }
        }
        for (j, p) in pose.iter().enumerate() {
            let (x, y, z) = (p[0] * size, p[1] * size, p[2] * size);
            let coords = [cos_y * x + sin_y * z, y, -sin_y * x + cos_y * z];
            for (c, v) in coords.iter().enumerate() {
                frames[[t, j, c]] = if j == 0 { 0.0 } else { v + noise.sample(rng) };
            }
        }
    }
    frames
}

fn correct_amplitude(rng: &mut ChaCha8Rng) -> Amplitude {
    let base = rng.random_range(0.85..1.15);
    Amplitude {
        left: base + rng.random_range(-0.05..0.05),
        right: base + rng.random_range(-0.05..0.05),
    }
}

fn incorrect_amplitude(rng: &mut ChaCha8Rng) -> Amplitude {
    if rng.random::<bool>() {
        let base = rng.random_range(0.3..0.6);
        Amplitude { left: base, right: base }
    } else {
        let weak = rng.random_range(0.1..0.4);
        let strong = rng.random_range(0.9..1.1);
        if rng.random::<bool>() {
            Amplitude { left: weak, right: strong }
        } else {
            Amplitude { left: strong, right: weak }
        }
    }
}

/// Three exercise types with binary assessments.
pub fn generate_binary(cfg: &SyntheticConfig) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let incorrect = (cfg.samples_per_type as f64 * cfg.incorrect_fraction).round() as usize;
    let mut samples = Vec::new();
    for (kind, ty) in SYNTHETIC_TYPES.iter().enumerate() {
        for i in 0..cfg.samples_per_type {
            let z = if i < cfg.samples_per_type - incorrect {
                Assessment::Correct
            } else {
                Assessment::Incorrect
            };
            let amp = match z {
                Assessment::Correct => correct_amplitude(&mut rng),
                Assessment::Incorrect => incorrect_amplitude(&mut rng),
            };
            let frames = render(kind, amp, cfg, &mut rng);
            samples.push(LabeledSample {
                id: format!("{ty}_{i:03}"),
                sequence: SkeletonSequence::new(frames, 30.0)?,
                exercise_type: (*ty).into(),
                label: Label::Binary(z),
                subject_id: format!("p{:02}", i % 12),
            });
        }
    }
    Dataset::new("synthetic", synthetic_graph(), samples)
}

/// One exercise type scored in `[0, 50]`; the score falls linearly with a
/// corruption level that shrinks and unbalances the movement.
pub fn generate_regression(cfg: &SyntheticConfig, kind: usize) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xc0ffee);
    let kind = kind % SYNTHETIC_TYPES.len();
    let ty = SYNTHETIC_TYPES[kind];
    let mut samples = Vec::new();
    for i in 0..cfg.samples_per_type {
        let c: f64 = rng.random();
        let base = 1.0 + rng.random_range(-0.08..0.08);
        let amp = if rng.random::<bool>() {
            Amplitude {
                left: base * (1.0 - 0.8 * c),
                right: base * (1.0 - 0.3 * c),
            }
        } else {
            Amplitude {
                left: base * (1.0 - 0.3 * c),
                right: base * (1.0 - 0.8 * c),
            }
        };
        let frames = render(kind, amp, cfg, &mut rng);
        samples.push(LabeledSample {
            id: format!("{ty}_r{i:03}"),
            sequence: SkeletonSequence::new(frames, 30.0)?,
            exercise_type: ty.into(),
            label: Label::clinical(CLINICAL_SCORE_MAX * (1.0 - c))?,
            subject_id: format!("p{:02}", i % 12),
        });
    }
    Dataset::new("synthetic-regression", synthetic_graph(), samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_shape_and_balance() {
        let ds = generate_binary(&SyntheticConfig::default()).unwrap();
        assert_eq!(ds.len(), 180);
        assert_eq!(ds.exercise_types().len(), 3);
        for (_, (plus, minus)) in ds.assessment_counts() {
            assert_eq!((plus, minus), (30, 30));
        }
        let f = ds.samples()[0].sequence.frames();
        assert_eq!(f.dim(), (32, 8, 3));
    }

    #[test]
    fn regression_scores_in_range() {
        let ds = generate_regression(&SyntheticConfig::default(), 0).unwrap();
        assert!(ds
            .samples()
            .iter()
            .all(|s| (0.0..=50.0).contains(&s.label.clinical_score().unwrap())));
    }

    #[test]
    fn deterministic() {
        let cfg = SyntheticConfig::default();
        assert_eq!(generate_binary(&cfg).unwrap(), generate_binary(&cfg).unwrap());
    }
}
