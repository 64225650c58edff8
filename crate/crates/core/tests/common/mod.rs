//! Independent scalar implementations used as test oracles.
#![allow(dead_code)]

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rehab_contrast::contrastive::DenominatorMode;
use rehab_contrast::skeleton::{Assessment, ExerciseType};

fn cos(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// The loss evaluated term by term, without any shifting or vectorization.
pub fn brute_force_loss(
    emb: ArrayView2<'_, f64>,
    types: &[ExerciseType],
    z: &[Assessment],
    tau: f64,
    mode: DenominatorMode,
) -> f64 {
    let n = emb.nrows();
    let rows: Vec<Vec<f64>> = emb.rows().into_iter().map(|r| r.to_vec()).collect();
    let sim = |i: usize, j: usize| cos(&rows[i], &rows[j]);
    let mut total = 0.0;
    for i in 0..n {
        if !z[i].is_correct() {
            continue;
        }
        let plus_count = (0..n).filter(|&j| types[j] == types[i] && z[j].is_correct()).count();
        for j in 0..n {
            if j == i || types[j] != types[i] || !z[j].is_correct() {
                continue;
            }
            let numerator = (sim(i, j) / tau).exp();
            let mut hard = 0.0;
            for k in 0..n {
                if types[k] == types[i] && !z[k].is_correct() {
                    hard += (sim(i, k) / tau).exp();
                }
            }
            let mut second = 0.0;
            for l in 0..n {
                let admitted = match mode {
                    DenominatorMode::Literal => l != i,
                    DenominatorMode::Prose => types[l] != types[i],
                };
                if admitted {
                    second += (sim(i, l) / tau).exp();
                }
            }
            total += -(1.0 / plus_count as f64) * (numerator / (hard + second)).ln();
        }
    }
    total
}

pub fn naive_accuracy(p: &[Assessment], t: &[Assessment]) -> f64 {
    let mut hits = 0;
    for i in 0..t.len() {
        if p[i] == t[i] {
            hits += 1;
        }
    }
    hits as f64 / t.len() as f64
}

/// Pairwise enumeration: wins count 1, ties one half.
pub fn naive_auc_roc(s: &[f64], t: &[Assessment]) -> f64 {
    let (mut score, mut pairs) = (0.0, 0.0);
    for i in 0..s.len() {
        for j in 0..s.len() {
            if t[i].is_correct() && !t[j].is_correct() {
                pairs += 1.0;
                if s[i] > s[j] {
                    score += 1.0;
                } else if s[i] == s[j] {
                    score += 0.5;
                }
            }
        }
    }
    score / pairs
}

/// Precision and recall at every distinct threshold, highest first; area is
/// the sum of precision times recall increments.
pub fn naive_auc_pr(s: &[f64], t: &[Assessment]) -> f64 {
    let positives = t.iter().filter(|z| z.is_correct()).count() as f64;
    let mut thresholds: Vec<f64> = s.to_vec();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    let (mut area, mut last_recall) = (0.0, 0.0);
    for theta in thresholds {
        let mut tp = 0.0;
        let mut predicted = 0.0;
        for i in 0..s.len() {
            if s[i] >= theta {
                predicted += 1.0;
                if t[i].is_correct() {
                    tp += 1.0;
                }
            }
        }
        let recall = tp / positives;
        area += (recall - last_recall) * (tp / predicted);
        last_recall = recall;
    }
    area
}

fn naive_ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&x| {
            let less = v.iter().filter(|&&y| y < x).count() as f64;
            let equal = v.iter().filter(|&&y| y == x).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn naive_spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (naive_ranks(a), naive_ranks(b));
    let n = ra.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma) * (x - ma)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb) * (y - mb)).sum();
    cov / (va * vb).sqrt()
}

/// Inverse-variance weighted reference computed with explicit loops.
pub fn naive_reference(v: &Array2<f64>, eps: f64) -> Vec<f64> {
    let (m, d) = v.dim();
    let mut w = vec![0.0; d];
    let mut col_sum = vec![0.0; d];
    for k in 0..d {
        let mean = (0..m).map(|i| v[[i, k]]).sum::<f64>() / m as f64;
        let var = (0..m).map(|i| (v[[i, k]] - mean).powi(2)).sum::<f64>() / m as f64;
        w[k] = 1.0 / (var + eps);
        col_sum[k] = (0..m).map(|i| v[[i, k]]).sum();
    }
    let total: f64 = w.iter().sum();
    (0..d).map(|k| w[k] / total * col_sum[k]).collect()
}

pub fn random_labels<R: Rng>(rng: &mut R, n: usize, type_count: usize) -> (Vec<ExerciseType>, Vec<Assessment>) {
    let types = (0..n)
        .map(|_| ExerciseType(format!("t{}", rng.random_range(0..type_count))))
        .collect();
    let z = (0..n)
        .map(|_| {
            if rng.random_bool(0.6) {
                Assessment::Correct
            } else {
                Assessment::Incorrect
            }
        })
        .collect();
    (types, z)
}

/// Uniformly random rotation from a normalized Gaussian quaternion.
pub fn random_rotation<R: Rng>(rng: &mut R) -> [[f64; 3]; 3] {
    use rand_distr::{Distribution, StandardNormal};
    let mut q: [f64; 4] = [0.0; 4];
    for v in &mut q {
        *v = StandardNormal.sample(rng);
    }
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    let [w, x, y, z] = q.map(|v| v / n);
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - z * w), 2.0 * (x * z + y * w)],
        [2.0 * (x * y + z * w), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - x * w)],
        [2.0 * (x * z - y * w), 2.0 * (y * z + x * w), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    rel_err_floor(a, b, 0.0)
}

/// `|a - b| / max(|a|, |b|, floor)`; the floor keeps vanishing gradients from
/// turning finite-difference noise into large relative errors.
pub fn rel_err_floor(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale = a
        .iter()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
        .max(b.iter().map(|x| x * x).sum::<f64>().sqrt())
        .max(floor);
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

pub mod network {
    use ndarray::{Array2, Array4};
    use rand::seq::IndexedRandom;
    use rand::Rng;
    use rehab_contrast::model::layers::{Slot, SlotMut};
    use rehab_contrast::model::{EncoderConfig, Head, ModelState, Module, ProjectionConfig};
    use rehab_contrast::skeleton::SkeletonGraph;

    /// A random 2-block model on a 3-joint chain with an 8-frame input.
    pub fn random_instance<R: Rng>(rng: &mut R) -> (ModelState, Array4<f64>, Array2<f64>) {
        let widths = [2usize, 3, 4, 5];
        let c1 = *widths.choose(rng).unwrap();
        let c2 = *widths.choose(rng).unwrap();
        let mut enc = EncoderConfig::tiny(vec![c1, c2]);
        enc.temporal_kernel = *[1usize, 3, 5].choose(rng).unwrap();
        enc.temporal_strides = vec![1, *[1usize, 2].choose(rng).unwrap()];
        enc.use_ri = rng.random_bool(0.3);
        let proj = ProjectionConfig { in_dim: c2, out_dim: 3 };
        let state = ModelState::new(enc, proj, SkeletonGraph::chain(3).unwrap(), rng.random()).unwrap();
        let x = Array4::from_shape_simple_fn((4, 8, 3, 3), || rng.random_range(-1.0..1.0));
        let probe = Array2::from_shape_simple_fn((4, 3), || rng.random_range(-1.0..1.0));
        (state, x, probe)
    }

    /// `sum(probe * g(f(x)))` with batch statistics.
    pub fn objective(state: &ModelState, x: &Array4<f64>, probe: &Array2<f64>) -> f64 {
        let mut s = state.clone();
        let (e, _) = s.encoder.forward_train(x.view()).unwrap();
        let p = s.project(e.view()).unwrap();
        (&p * probe).sum()
    }

    pub fn analytic_gradients(state: &mut ModelState, x: &Array4<f64>, probe: &Array2<f64>) -> Vec<(String, Vec<f64>)> {
        state.zero_grad();
        let (e, cache) = state.encoder.forward_train(x.view()).unwrap();
        let Head::Projection(head) = &mut state.head else { unreachable!() };
        let d_e = head.backward(e.view(), probe.view());
        state.encoder.backward(cache, &d_e);
        let mut out = Vec::new();
        state.visit("", &mut |name, slot| {
            if let Slot::Param(p) = slot {
                out.push((name.to_owned(), p.grad.iter().copied().collect()));
            }
        });
        out
    }

    pub fn perturbed(state: &ModelState, name: &str, index: usize, delta: f64) -> ModelState {
        let mut s = state.clone();
        s.visit_mut("", &mut |n, slot| {
            if let SlotMut::Param(p) = slot {
                if n == name {
                    let flat = p.value.as_slice_mut().unwrap();
                    flat[index] += delta;
                }
            }
        });
        s
    }

    /// Relative error between analytic and central-difference gradients on
    /// `samples` random parameter coordinates.
    pub fn gradient_check<R: Rng>(rng: &mut R, samples: usize, h: f64) -> f64 {
        let (mut state, x, probe) = random_instance(rng);
        let grads = analytic_gradients(&mut state, &x, &probe);
        let mut analytic = Vec::new();
        let mut numeric = Vec::new();
        for _ in 0..samples {
            let (name, g) = grads.choose(rng).unwrap();
            let idx = rng.random_range(0..g.len());
            let up = objective(&perturbed(&state, name, idx, h), &x, &probe);
            let down = objective(&perturbed(&state, name, idx, -h), &x, &probe);
            analytic.push(g[idx]);
            numeric.push((up - down) / (2.0 * h));
        }
        super::rel_err_floor(&analytic, &numeric, 1e-6)
    }
}

/// Every named parameter and buffer, flattened, in visit order.
pub fn snapshot(state: &rehab_contrast::model::ModelState) -> Vec<(String, Vec<f64>)> {
    use rehab_contrast::model::layers::{Module, Slot};
    let mut out = Vec::new();
    state.visit("", &mut |name, slot| {
        let values = match slot {
            Slot::Param(p) => p.value.iter().copied().collect(),
            Slot::Buffer(b) => b.iter().copied().collect(),
        };
        out.push((name.to_owned(), values));
    });
    out
}
