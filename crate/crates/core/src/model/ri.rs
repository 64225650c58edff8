use ndarray::{s, Array3, Array4, ArrayView3, ArrayView4, Axis};

use crate::skeleton::SkeletonSequence;

/// Per-frame Gram matrix of the first three coordinate channels.
///
/// Joint `j`'s feature vector becomes its dot products with every joint, so
/// the output is `T x J x J`. Coordinates are expected to be root-centered
/// already; the result is then invariant to any global rotation.
pub fn ri_frames(frames: ArrayView3<'_, f64>) -> Array3<f64> {
    let (t, j, c) = frames.dim();
    let dims = c.min(3);
    let mut out = Array3::zeros((t, j, j));
    for (frame, mut gram) in frames.outer_iter().zip(out.outer_iter_mut()) {
        let coords = frame.slice(s![.., ..dims]);
        gram.assign(&coords.dot(&coords.t()));
    }
    out
}

pub fn ri_descriptor(sequence: &SkeletonSequence) -> SkeletonSequence {
    SkeletonSequence::new(ri_frames(sequence.frames()), sequence.fps()).expect("gram matrices of finite data are finite")
}

/// Batched descriptor over `B x T x J x C` views.
pub fn ri_batch(views: ArrayView4<'_, f64>) -> Array4<f64> {
    let (b, t, j, _) = views.dim();
    let mut out = Array4::zeros((b, t, j, j));
    for (src, mut dst) in views.axis_iter(Axis(0)).zip(out.axis_iter_mut(Axis(0))) {
        dst.assign(&ri_frames(src));
    }
    out
}
