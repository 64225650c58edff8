use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::{join, Linear, Module, Slot, SlotMut};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProjectionConfig {
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        ProjectionConfig { in_dim: 256, out_dim: 128 }
    }
}

/// The head `g`: a single affine map with no output normalization.
#[derive(Debug, Clone)]
pub struct ProjectionHead {
    pub linear: Linear,
}

impl ProjectionHead {
    pub fn new<R: Rng + ?Sized>(config: ProjectionConfig, rng: &mut R) -> Result<Self> {
        if config.in_dim == 0 || config.out_dim == 0 {
            return Err(Error::Argument("projection dimensions must be positive".into()));
        }
        Ok(ProjectionHead {
            linear: Linear::new(config.in_dim, config.out_dim, rng),
        })
    }

    pub fn config(&self) -> ProjectionConfig {
        ProjectionConfig {
            in_dim: self.linear.in_dim(),
            out_dim: self.linear.out_dim(),
        }
    }

    pub fn forward(&self, embeddings: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        check_width(embeddings, self.linear.in_dim())?;
        Ok(self.linear.forward(embeddings))
    }

    pub fn backward(&mut self, embeddings: ArrayView2<'_, f64>, d_out: ArrayView2<'_, f64>) -> Array2<f64> {
        self.linear.backward(embeddings, d_out)
    }
}

impl Module for ProjectionHead {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, Slot<'_>)) {
        self.linear.visit(&join(prefix, "linear"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, SlotMut<'_>)) {
        self.linear.visit_mut(&join(prefix, "linear"), f);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegressionHeadConfig {
    pub in_dim: usize,
    pub hidden_dim: usize,
    pub freeze_encoder: bool,
}

impl Default for RegressionHeadConfig {
    fn default() -> Self {
        RegressionHeadConfig {
            in_dim: 256,
            hidden_dim: 128,
            freeze_encoder: true,
        }
    }
}

/// Two affine layers with a ReLU between them, ending in one scalar.
#[derive(Debug, Clone)]
pub struct RegressionHead {
    pub hidden: Linear,
    pub output: Linear,
}

pub struct RegressionCache {
    input: Array2<f64>,
    hidden: Array2<f64>,
}

impl RegressionHead {
    pub fn new<R: Rng + ?Sized>(config: RegressionHeadConfig, rng: &mut R) -> Result<Self> {
        if config.in_dim == 0 || config.hidden_dim == 0 {
            return Err(Error::Argument("regression head dimensions must be positive".into()));
        }
        Ok(RegressionHead {
            hidden: Linear::new(config.in_dim, config.hidden_dim, rng),
            output: Linear::new(config.hidden_dim, 1, rng),
        })
    }

    pub fn in_dim(&self) -> usize {
        self.hidden.in_dim()
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden.out_dim()
    }

    pub fn forward(&self, embeddings: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        Ok(self.forward_cached(embeddings)?.0)
    }

    pub fn forward_cached(&self, embeddings: ArrayView2<'_, f64>) -> Result<(Array1<f64>, RegressionCache)> {
        check_width(embeddings, self.hidden.in_dim())?;
        let hidden = self.hidden.forward(embeddings).mapv(|v| v.max(0.0));
        let out = self.output.forward(hidden.view()).column(0).to_owned();
        Ok((
            out,
            RegressionCache {
                input: embeddings.to_owned(),
                hidden,
            },
        ))
    }

    /// Returns `dL/d embeddings`.
    pub fn backward(&mut self, cache: RegressionCache, d_out: &Array1<f64>) -> Array2<f64> {
        let d_out = d_out.view().insert_axis(ndarray::Axis(1));
        let mut d_hidden = self.output.backward(cache.hidden.view(), d_out);
        ndarray::Zip::from(&mut d_hidden).and(&cache.hidden).for_each(|d, &h| {
            if h <= 0.0 {
                *d = 0.0;
            }
        });
        self.hidden.backward(cache.input.view(), d_hidden.view())
    }
}

impl Module for RegressionHead {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, Slot<'_>)) {
        self.hidden.visit(&join(prefix, "hidden"), f);
        self.output.visit(&join(prefix, "output"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, SlotMut<'_>)) {
        self.hidden.visit_mut(&join(prefix, "hidden"), f);
        self.output.visit_mut(&join(prefix, "output"), f);
    }
}

fn check_width(x: ArrayView2<'_, f64>, expected: usize) -> Result<()> {
    if x.ncols() != expected {
        return Err(Error::Shape(format!("expected {expected} input features, got {}", x.ncols())));
    }
    Ok(())
}
