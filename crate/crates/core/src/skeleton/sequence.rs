use ndarray::{Array3, ArrayView3, Axis};

use crate::error::{Error, Result};

/// A `T x J x C` array of joint coordinates sampled at a fixed frame rate.
///
/// Construction guarantees `T >= 2`, `C >= 2` and that every entry is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonSequence {
    frames: Array3<f64>,
    fps: f64,
}

impl SkeletonSequence {
    pub fn new(frames: Array3<f64>, fps: f64) -> Result<Self> {
        let (t, j, c) = frames.dim();
        if t < 2 {
            return Err(Error::Shape(format!("sequence needs at least 2 frames, got {t}")));
        }
        if j == 0 {
            return Err(Error::Shape("sequence has no joints".into()));
        }
        if c < 2 {
            return Err(Error::Shape(format!("sequence needs at least 2 channels, got {c}")));
        }
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::Argument(format!("fps must be positive, got {fps}")));
        }
        if let Some(pos) = frames.iter().position(|v| !v.is_finite()) {
            let frame = pos / (j * c);
            return Err(Error::Shape(format!("non-finite coordinate in frame {frame}")));
        }
        Ok(SkeletonSequence {
            frames: frames.as_standard_layout().into_owned(),
            fps,
        })
    }

    pub fn frames(&self) -> ArrayView3<'_, f64> {
        self.frames.view()
    }

    pub fn into_frames(self) -> Array3<f64> {
        self.frames
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn len(&self) -> usize {
        self.frames.len_of(Axis(0))
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn joint_count(&self) -> usize {
        self.frames.len_of(Axis(1))
    }

    pub fn channel_count(&self) -> usize {
        self.frames.len_of(Axis(2))
    }

    /// Translates every frame so `root` sits at the origin.
    pub fn root_centered(&self, root: usize) -> Result<Self> {
        if root >= self.joint_count() {
            return Err(Error::Argument(format!("root joint {root} out of range")));
        }
        let mut out = self.frames.clone();
        for mut frame in out.outer_iter_mut() {
            let origin = frame.index_axis(Axis(0), root).to_owned();
            for mut joint in frame.outer_iter_mut() {
                joint -= &origin;
            }
        }
        SkeletonSequence::new(out, self.fps)
    }
}

/// Fills non-finite entries of each joint channel by linear interpolation
/// between the nearest finite frames (constant extension at the ends).
///
/// Fails when a joint has no finite value on some channel for the whole
/// recording; the error message names the joint.
pub fn repair_non_finite(frames: &mut Array3<f64>) -> std::result::Result<usize, String> {
    let (t, j, c) = frames.dim();
    let mut repaired = 0;
    for joint in 0..j {
        for ch in 0..c {
            let mut track: Vec<f64> = (0..t).map(|f| frames[[f, joint, ch]]).collect();
            let finite: Vec<usize> = (0..t).filter(|&f| track[f].is_finite()).collect();
            if finite.len() == t {
                continue;
            }
            if finite.is_empty() {
                return Err(format!("joint {joint} channel {ch} has no finite values"));
            }
            for f in 0..t {
                if track[f].is_finite() {
                    continue;
                }
                let next = finite.partition_point(|&g| g < f);
                track[f] = match (next.checked_sub(1).map(|i| finite[i]), finite.get(next)) {
                    (Some(a), Some(&b)) => {
                        let w = (f - a) as f64 / (b - a) as f64;
                        track[a] * (1.0 - w) + track[b] * w
                    }
                    (Some(a), None) => track[a],
                    (None, Some(&b)) => track[b],
                    (None, None) => unreachable!("finite is non-empty"),
                };
                repaired += 1;
            }
            for f in 0..t {
                frames[[f, joint, ch]] = track[f];
            }
        }
    }
    Ok(repaired)
}

/// Linear re-sampling of the time axis onto `target_length` uniformly spaced
/// points. Endpoints are reproduced exactly and equal lengths return a copy.
pub fn resample_frames(frames: ArrayView3<'_, f64>, target_length: usize) -> Array3<f64> {
    let (t, j, c) = frames.dim();
    if t == target_length {
        return frames.to_owned();
    }
    let mut out = Array3::zeros((target_length, j, c));
    let denom = (target_length - 1).max(1);
    for i in 0..target_length {
        let num = i * (t - 1);
        let lo = num / denom;
        let frac = (num % denom) as f64 / denom as f64;
        if frac == 0.0 {
            out.index_axis_mut(Axis(0), i).assign(&frames.index_axis(Axis(0), lo));
        } else {
            let a = frames.index_axis(Axis(0), lo);
            let b = frames.index_axis(Axis(0), lo + 1);
            let mut dst = out.index_axis_mut(Axis(0), i);
            ndarray::Zip::from(&mut dst)
                .and(&a)
                .and(&b)
                .for_each(|d, &x, &y| *d = x + (y - x) * frac);
        }
    }
    out
}

/// Re-samples a sequence to `target_length` frames.
pub fn resample_temporal(sequence: &SkeletonSequence, target_length: usize) -> Result<SkeletonSequence> {
    if target_length < 2 {
        return Err(Error::Argument(format!(
            "target length must be at least 2, got {target_length}"
        )));
    }
    let frames = resample_frames(sequence.frames(), target_length);
    let fps = sequence.fps() * (target_length - 1) as f64 / (sequence.len() - 1) as f64;
    SkeletonSequence::new(frames, fps)
}
