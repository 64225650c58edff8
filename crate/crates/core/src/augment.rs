//! Label-preserving skeleton augmentations and two-view batch construction.

use ndarray::{s, Array2, Array3, Array4, ArrayView3, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skeleton::{resample_frames, Assessment, ExerciseType, Label, LabeledSample, SkeletonSequence};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentationConfig {
    /// Maximum absolute off-diagonal shear coefficient.
    pub shear_range: f64,
    /// Maximum absolute rotation per axis, radians.
    pub rotation_range: f64,
    pub resample_factor_range: (f64, f64),
    pub crop_fraction_range: (f64, f64),
    /// Temporal Gaussian blur width, in frames.
    pub blur_sigma_range: (f64, f64),
    pub noise_sigma: f64,
    /// Probability that each augmentation is applied on a draw.
    pub apply_probability: f64,
    pub rng_seed: u64,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        AugmentationConfig {
            shear_range: 0.1,
            rotation_range: 15f64.to_radians(),
            resample_factor_range: (0.8, 1.2),
            crop_fraction_range: (0.8, 1.0),
            blur_sigma_range: (0.0, 1.0),
            noise_sigma: 0.01,
            apply_probability: 0.5,
            rng_seed: 0,
        }
    }
}

impl AugmentationConfig {
    /// Every augmentation degenerates to the identity.
    pub fn identity() -> Self {
        AugmentationConfig {
            shear_range: 0.0,
            rotation_range: 0.0,
            resample_factor_range: (1.0, 1.0),
            crop_fraction_range: (1.0, 1.0),
            blur_sigma_range: (0.0, 0.0),
            noise_sigma: 0.0,
            apply_probability: 0.5,
            rng_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = [self.shear_range, self.rotation_range, self.noise_sigma];
        if nonneg.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Argument("augmentation magnitudes must be finite and nonnegative".into()));
        }
        for (name, (lo, hi)) in [
            ("resample_factor_range", self.resample_factor_range),
            ("crop_fraction_range", self.crop_fraction_range),
            ("blur_sigma_range", self.blur_sigma_range),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo <= hi) {
                return Err(Error::Argument(format!("{name} must be an ordered nonnegative interval")));
            }
        }
        if self.resample_factor_range.0 <= 0.0 {
            return Err(Error::Argument("resample factors must be positive".into()));
        }
        let (clo, chi) = self.crop_fraction_range;
        if clo <= 0.0 || chi > 1.0 {
            return Err(Error::Argument("crop fractions must lie in (0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.apply_probability) {
            return Err(Error::Argument("apply_probability must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Copy with the noise level expressed relative to a coordinate scale.
    pub fn with_noise_scale(&self, scale: f64) -> Self {
        AugmentationConfig {
            noise_sigma: self.noise_sigma * scale,
            ..self.clone()
        }
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    let u: f64 = rng.random();
    lo + (hi - lo) * u
}

fn rotation_matrix(dims: usize, angles: [f64; 3]) -> Array2<f64> {
    if dims == 2 {
        let (s, c) = angles[2].sin_cos();
        return ndarray::arr2(&[[c, -s], [s, c]]);
    }
    let (sx, cx) = angles[0].sin_cos();
    let (sy, cy) = angles[1].sin_cos();
    let (sz, cz) = angles[2].sin_cos();
    let rx = ndarray::arr2(&[[1.0, 0.0, 0.0], [0.0, cx, -sx], [0.0, sx, cx]]);
    let ry = ndarray::arr2(&[[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]]);
    let rz = ndarray::arr2(&[[cz, -sz, 0.0], [sz, cz, 0.0], [0.0, 0.0, 1.0]]);
    rz.dot(&ry).dot(&rx)
}

/// Applies `m` to the first `m.nrows()` channels of every joint in every frame.
fn apply_linear(frames: &mut Array3<f64>, m: &Array2<f64>) {
    let d = m.nrows();
    for mut frame in frames.outer_iter_mut() {
        for mut joint in frame.outer_iter_mut() {
            let v = joint.slice(s![..d]).to_owned();
            joint.slice_mut(s![..d]).assign(&m.dot(&v));
        }
    }
}

fn gaussian_blur(frames: &Array3<f64>, sigma: f64) -> Array3<f64> {
    let t = frames.len_of(Axis(0));
    let radius = (3.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let norm: f64 = kernel.iter().sum();
    let mut out = Array3::zeros(frames.raw_dim());
    for i in 0..t as isize {
        let mut dst = out.index_axis_mut(Axis(0), i as usize);
        for (k, w) in (-radius..=radius).zip(&kernel) {
            let src = (i + k).clamp(0, t as isize - 1) as usize;
            dst.scaled_add(w / norm, &frames.index_axis(Axis(0), src));
        }
    }
    out
}

fn augment_frames<R: Rng + ?Sized>(input: ArrayView3<'_, f64>, config: &AugmentationConfig, rng: &mut R) -> Array3<f64> {
    let (t, _, c) = input.dim();
    let dims = c.min(3);
    let p = config.apply_probability;
    let mut frames = input.to_owned();

    // Spatial shear.
    if rng.random::<f64>() < p && config.shear_range > 0.0 {
        let mut m = Array2::eye(dims);
        for r in 0..dims {
            for col in 0..dims {
                if r != col {
                    m[[r, col]] = uniform(rng, -config.shear_range, config.shear_range);
                }
            }
        }
        apply_linear(&mut frames, &m);
    }

    // Spatial rotation.
    if rng.random::<f64>() < p && config.rotation_range > 0.0 {
        let r = config.rotation_range;
        let angles = [uniform(rng, -r, r), uniform(rng, -r, r), uniform(rng, -r, r)];
        apply_linear(&mut frames, &rotation_matrix(dims, angles));
    }

    // Temporal down/up-sampling, then back to the canonical length.
    if rng.random::<f64>() < p {
        let (lo, hi) = config.resample_factor_range;
        let factor = uniform(rng, lo, hi);
        let len = ((t as f64 * factor).round() as usize).max(2);
        if len != t {
            frames = resample_frames(resample_frames(frames.view(), len).view(), t);
        }
    }

    // Temporal crop to a contiguous window, stretched back to length.
    if rng.random::<f64>() < p {
        let (lo, hi) = config.crop_fraction_range;
        let fraction = uniform(rng, lo, hi);
        let len = ((t as f64 * fraction).round() as usize).clamp(2, t);
        let start = rng.random_range(0..=t - len);
        if len != t {
            frames = resample_frames(frames.slice(s![start..start + len, .., ..]), t);
        }
    }

    // Temporal Gaussian blur of every joint channel.
    if rng.random::<f64>() < p {
        let (lo, hi) = config.blur_sigma_range;
        let sigma = uniform(rng, lo, hi);
        if sigma > 1e-6 {
            frames = gaussian_blur(&frames, sigma);
        }
    }

    // Additive coordinate-wise Gaussian noise.
    if rng.random::<f64>() < p && config.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, config.noise_sigma).expect("sigma is finite and positive");
        frames.mapv_inplace(|v| v + normal.sample(rng));
    }
    frames
}

/// Random semantic-preserving transformation of one sequence.
///
/// Each augmentation fires independently with `config.apply_probability`;
/// the output always has the input's length, joints and channels.
pub fn augment<R: Rng + ?Sized>(sequence: &SkeletonSequence, config: &AugmentationConfig, rng: &mut R) -> SkeletonSequence {
    let frames = augment_frames(sequence.frames(), config, rng);
    SkeletonSequence::new(frames, sequence.fps()).expect("augmentations keep shape and finiteness")
}

/// Two augmented views per source tuple; views `2k` and `2k + 1` come from tuple `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewBatch {
    /// `2N x T x J x C`.
    pub views: Array4<f64>,
    pub exercise_type: Vec<ExerciseType>,
    pub assessment: Vec<Assessment>,
    pub origin_index: Vec<usize>,
}

impl ViewBatch {
    pub fn len(&self) -> usize {
        self.origin_index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origin_index.is_empty()
    }
}

pub fn build_two_view_batch<R: Rng + ?Sized>(
    tuples: &[&LabeledSample],
    config: &AugmentationConfig,
    rng: &mut R,
) -> Result<ViewBatch> {
    let first = tuples
        .first()
        .ok_or_else(|| Error::Argument("cannot build a view batch from zero tuples".into()))?;
    let shape = first.sequence.frames().dim();
    let n = tuples.len();
    let mut views = Array4::zeros((2 * n, shape.0, shape.1, shape.2));
    let mut exercise_type = Vec::with_capacity(2 * n);
    let mut assessment = Vec::with_capacity(2 * n);
    let mut origin_index = Vec::with_capacity(2 * n);
    for (k, sample) in tuples.iter().enumerate() {
        if sample.sequence.frames().dim() != shape {
            return Err(Error::Shape(format!(
                "sample {} has shape {:?}, batch expects {shape:?}",
                sample.id,
                sample.sequence.frames().dim()
            )));
        }
        let Label::Binary(z) = sample.label else {
            return Err(Error::Argument(format!("sample {} has no binary assessment", sample.id)));
        };
        for v in 0..2 {
            let view = augment_frames(sample.sequence.frames(), config, rng);
            views.index_axis_mut(Axis(0), 2 * k + v).assign(&view);
            exercise_type.push(sample.exercise_type.clone());
            assessment.push(z);
            origin_index.push(k);
        }
    }
    Ok(ViewBatch {
        views,
        exercise_type,
        assessment,
        origin_index,
    })
}
