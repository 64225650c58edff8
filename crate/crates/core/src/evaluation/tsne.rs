//! Exact t-distributed stochastic neighbour embedding.

use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TsneConfig {
    pub components: usize,
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    pub exaggeration_iterations: usize,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            components: 2,
            perplexity: 20.0,
            iterations: 1000,
            learning_rate: 200.0,
            early_exaggeration: 12.0,
            exaggeration_iterations: 250,
            seed: 0,
        }
    }
}

fn squared_distances(x: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = x.nrows();
    let mut d = Array2::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            let v: f64 = x.row(i).iter().zip(x.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
            d[[i, j]] = v;
            d[[j, i]] = v;
        }
    }
    d
}

/// Row-conditional affinities whose entropy matches `log(perplexity)`.
fn conditional_affinities(d: &Array2<f64>, perplexity: f64) -> Array2<f64> {
    let n = d.nrows();
    let target = perplexity.ln();
    let mut p = Array2::zeros((n, n));
    for i in 0..n {
        let (mut beta, mut lo, mut hi) = (1.0f64, 0.0f64, f64::INFINITY);
        let row_min = (0..n).filter(|&j| j != i).map(|j| d[[i, j]]).fold(f64::INFINITY, f64::min);
        for _ in 0..100 {
            let mut sum = 0.0;
            let mut weighted = 0.0;
            for j in (0..n).filter(|&j| j != i) {
                let e = (-(d[[i, j]] - row_min) * beta).exp();
                p[[i, j]] = e;
                sum += e;
                weighted += (d[[i, j]] - row_min) * e;
            }
            let entropy = sum.ln() + beta * weighted / sum;
            for j in (0..n).filter(|&j| j != i) {
                p[[i, j]] /= sum;
            }
            let gap = entropy - target;
            if gap.abs() < 1e-5 {
                break;
            }
            if gap > 0.0 {
                lo = beta;
                beta = if hi.is_finite() { 0.5 * (beta + hi) } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = 0.5 * (beta + lo);
            }
        }
    }
    p
}

/// Low-dimensional coordinates, one row per input row.
pub fn tsne(x: ArrayView2<'_, f64>, config: &TsneConfig) -> Array2<f64> {
    let n = x.nrows();
    let dims = config.components;
    if n < 2 {
        return Array2::zeros((n, dims));
    }
    let perplexity = config.perplexity.min(((n - 1) as f64 / 3.0).max(1.0));
    let mut p = conditional_affinities(&squared_distances(x), perplexity);
    p = (&p + &p.t()) / (2.0 * n as f64);
    p.mapv_inplace(|v| v.max(1e-12));

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let normal = Normal::new(0.0, 1e-4).expect("valid normal");
    let mut y = Array2::from_shape_simple_fn((n, dims), || normal.sample(&mut rng));
    let mut velocity = Array2::<f64>::zeros((n, dims));
    let mut gains = Array2::<f64>::ones((n, dims));
    let mut num = Array2::<f64>::zeros((n, n));

    for iter in 0..config.iterations {
        let exaggeration = if iter < config.exaggeration_iterations {
            config.early_exaggeration
        } else {
            1.0
        };
        let momentum = if iter < config.exaggeration_iterations { 0.5 } else { 0.8 };
        let mut total = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                let d2: f64 = (0..dims).map(|k| { let d: f64 = y[[i, k]] - y[[j, k]]; d * d }).sum();
                let q = 1.0 / (1.0 + d2);
                num[[i, j]] = q;
                num[[j, i]] = q;
                total += 2.0 * q;
            }
        }
        let mut grad = Array2::<f64>::zeros((n, dims));
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let w = (exaggeration * p[[i, j]] - num[[i, j]] / total) * num[[i, j]];
                for k in 0..dims {
                    grad[[i, k]] += 4.0 * w * (y[[i, k]] - y[[j, k]]);
                }
            }
        }
        ndarray::Zip::from(&mut gains)
            .and(&grad)
            .and(&velocity)
            .for_each(|g, &dg, &v| {
                *g = if (dg > 0.0) != (v > 0.0) { *g + 0.2 } else { (*g * 0.8).max(0.01) };
            });
        ndarray::Zip::from(&mut velocity)
            .and(&gains)
            .and(&grad)
            .for_each(|v, &g, &dg| *v = momentum * *v - config.learning_rate * g * dg);
        y += &velocity;
        let mean = y.mean_axis(ndarray::Axis(0)).expect("n >= 2");
        y -= &mean;
    }
    y
}
