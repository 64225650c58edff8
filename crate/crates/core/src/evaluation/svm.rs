//! Radial-basis-function support vector classifier trained by sequential
//! minimal optimization with second-order working-set selection.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use super::metrics::accuracy;
use crate::error::{Error, Result};
use crate::skeleton::Assessment;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmConfig {
    pub c: f64,
    pub gamma: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            c: 1.0,
            gamma: 1.0 / 128.0,
            tolerance: 1e-3,
            max_iterations: 1_000_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RbfSvm {
    support: Array2<f64>,
    coef: Array1<f64>,
    rho: f64,
    gamma: f64,
}

fn rbf(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>, gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

const TAU: f64 = 1e-12;

impl RbfSvm {
    pub fn fit(x: ArrayView2<'_, f64>, labels: &[Assessment], config: &SvmConfig) -> Result<Self> {
        let n = x.nrows();
        if n != labels.len() {
            return Err(Error::Shape(format!("{n} rows for {} labels", labels.len())));
        }
        let y: Vec<f64> = labels.iter().map(|z| if z.is_correct() { 1.0 } else { -1.0 }).collect();
        if !(y.contains(&1.0) && y.contains(&-1.0)) {
            return Err(Error::Argument("SVM training data must contain both classes".into()));
        }
        let c = config.c;
        let k = Array2::from_shape_fn((n, n), |(i, j)| rbf(x.row(i), x.row(j), config.gamma));
        let q = |i: usize, j: usize| y[i] * y[j] * k[[i, j]];
        let mut alpha = vec![0.0; n];
        let mut grad = vec![-1.0; n];
        let upper = |a: f64| a >= c;
        let lower = |a: f64| a <= 0.0;

        for _ in 0..config.max_iterations {
            let mut gmax = f64::NEG_INFINITY;
            let mut i_sel = None;
            for t in 0..n {
                let candidate = if y[t] > 0.0 {
                    (!upper(alpha[t])).then_some(-grad[t])
                } else {
                    (!lower(alpha[t])).then_some(grad[t])
                };
                if let Some(v) = candidate {
                    if v >= gmax {
                        gmax = v;
                        i_sel = Some(t);
                    }
                }
            }
            let Some(i) = i_sel else { break };
            let mut gmax2 = f64::NEG_INFINITY;
            let mut obj_min = f64::INFINITY;
            let mut j_sel = None;
            for j in 0..n {
                let (grad_diff, quad) = if y[j] > 0.0 {
                    if lower(alpha[j]) {
                        continue;
                    }
                    gmax2 = gmax2.max(grad[j]);
                    (gmax + grad[j], k[[i, i]] + k[[j, j]] - 2.0 * y[i] * q(i, j))
                } else {
                    if upper(alpha[j]) {
                        continue;
                    }
                    gmax2 = gmax2.max(-grad[j]);
                    (gmax - grad[j], k[[i, i]] + k[[j, j]] + 2.0 * y[i] * q(i, j))
                };
                if grad_diff > 0.0 {
                    let obj = -(grad_diff * grad_diff) / if quad > 0.0 { quad } else { TAU };
                    if obj <= obj_min {
                        obj_min = obj;
                        j_sel = Some(j);
                    }
                }
            }
            let Some(j) = j_sel else { break };
            if gmax + gmax2 < config.tolerance {
                break;
            }

            let (old_i, old_j) = (alpha[i], alpha[j]);
            if y[i] != y[j] {
                let quad = (k[[i, i]] + k[[j, j]] + 2.0 * q(i, j)).max(TAU);
                let delta = (-grad[i] - grad[j]) / quad;
                let diff = alpha[i] - alpha[j];
                alpha[i] += delta;
                alpha[j] += delta;
                if diff > 0.0 {
                    if alpha[j] < 0.0 {
                        alpha[j] = 0.0;
                        alpha[i] = diff;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = -diff;
                }
                if diff > 0.0 {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = c - diff;
                    }
                } else if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = c + diff;
                }
            } else {
                let quad = (k[[i, i]] + k[[j, j]] - 2.0 * q(i, j)).max(TAU);
                let delta = (grad[i] - grad[j]) / quad;
                let sum = alpha[i] + alpha[j];
                alpha[i] -= delta;
                alpha[j] += delta;
                if sum > c {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = sum - c;
                    }
                } else if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if sum > c {
                    if alpha[j] > c {
                        alpha[j] = c;
                        alpha[i] = sum - c;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }
            let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
            for t in 0..n {
                grad[t] += q(i, t) * di + q(j, t) * dj;
            }
        }

        let (mut ub, mut lb, mut sum_free, mut n_free) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
        for t in 0..n {
            let yg = y[t] * grad[t];
            if upper(alpha[t]) {
                if y[t] < 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else if lower(alpha[t]) {
                if y[t] > 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else {
                n_free += 1;
                sum_free += yg;
            }
        }
        let rho = if n_free > 0 { sum_free / n_free as f64 } else { 0.5 * (ub + lb) };

        let keep: Vec<usize> = (0..n).filter(|&t| alpha[t] > 0.0).collect();
        Ok(RbfSvm {
            support: x.select(ndarray::Axis(0), &keep),
            coef: keep.iter().map(|&t| alpha[t] * y[t]).collect(),
            rho,
            gamma: config.gamma,
        })
    }

    pub fn support_vector_count(&self) -> usize {
        self.coef.len()
    }

    pub fn decision(&self, x: ArrayView1<'_, f64>) -> f64 {
        self.support
            .rows()
            .into_iter()
            .zip(self.coef.iter())
            .map(|(s, &a)| a * rbf(s, x, self.gamma))
            .sum::<f64>()
            - self.rho
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Vec<Assessment> {
        x.rows()
            .into_iter()
            .map(|r| {
                if self.decision(r) > 0.0 {
                    Assessment::Correct
                } else {
                    Assessment::Incorrect
                }
            })
            .collect()
    }
}

/// Validation accuracy of an RBF classifier fit on the training representations.
pub fn svm_probe(
    train: ArrayView2<'_, f64>,
    train_labels: &[Assessment],
    validation: ArrayView2<'_, f64>,
    validation_labels: &[Assessment],
    config: &SvmConfig,
) -> Result<f64> {
    let model = RbfSvm::fit(train, train_labels, config)?;
    accuracy(&model.predict(validation), validation_labels)
}
