use ndarray::{Array2, Array4, ArrayView4, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::adjacency::{normalized_adjacency, PartitionStrategy};
use super::layers::{
    join, relu4, relu4_backward, to_channels_first, BatchNorm, BatchNormCache, GraphConv, GraphConvCache, Module,
    Slot, SlotMut, TemporalConv, TemporalConvCache,
};
use super::ri::ri_batch;
use crate::error::{Error, Result};
use crate::skeleton::SkeletonGraph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    pub layer_channels: Vec<usize>,
    pub temporal_kernel: usize,
    pub temporal_strides: Vec<usize>,
    /// Block width divided by bottleneck width.
    pub bottleneck_ratio: f64,
    pub partition_strategy: PartitionStrategy,
    pub embedding_dim: usize,
    pub use_ri: bool,
    /// Coordinate channels of the input sequences.
    pub in_channels: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            layer_channels: vec![64, 64, 64, 128, 128, 128, 256, 256],
            temporal_kernel: 9,
            temporal_strides: vec![1, 1, 1, 2, 1, 1, 2, 1],
            bottleneck_ratio: 2.0,
            partition_strategy: PartitionStrategy::Spatial,
            embedding_dim: 256,
            use_ri: false,
            in_channels: 3,
        }
    }
}

impl EncoderConfig {
    /// A narrow network for quick experiments and tests.
    pub fn tiny(layer_channels: Vec<usize>) -> Self {
        let embedding_dim = *layer_channels.last().unwrap_or(&0);
        EncoderConfig {
            temporal_strides: vec![1; layer_channels.len()],
            layer_channels,
            embedding_dim,
            ..EncoderConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Argument(m));
        if self.layer_channels.is_empty() {
            return bad("encoder needs at least one layer".into());
        }
        if self.layer_channels.len() != self.temporal_strides.len() {
            return bad(format!(
                "{} layer widths but {} temporal strides",
                self.layer_channels.len(),
                self.temporal_strides.len()
            ));
        }
        if self.layer_channels.contains(&0) || self.temporal_strides.contains(&0) {
            return bad("layer widths and strides must be positive".into());
        }
        if self.temporal_kernel == 0 || self.temporal_kernel % 2 == 0 {
            return bad(format!("temporal kernel must be odd, got {}", self.temporal_kernel));
        }
        if !(self.bottleneck_ratio.is_finite() && self.bottleneck_ratio > 0.0) {
            return bad(format!("bottleneck ratio must be positive, got {}", self.bottleneck_ratio));
        }
        if self.layer_channels.last() != Some(&self.embedding_dim) {
            return bad(format!(
                "last layer width {} differs from embedding_dim {}",
                self.layer_channels.last().unwrap(),
                self.embedding_dim
            ));
        }
        if self.in_channels < 2 || (self.use_ri && self.in_channels < 3) {
            return bad(format!("unsupported input channel count {}", self.in_channels));
        }
        Ok(())
    }

    pub fn bottleneck_width(&self, channels: usize) -> usize {
        ((channels as f64 / self.bottleneck_ratio).round() as usize).max(1)
    }

    /// Channels entering the first block.
    pub fn network_input_channels(&self, joint_count: usize) -> usize {
        if self.use_ri {
            joint_count
        } else {
            self.in_channels
        }
    }
}

/// Projection applied to the residual branch when shape changes.
#[derive(Debug, Clone)]
struct Shortcut {
    conv: TemporalConv,
    bn: BatchNorm,
}

/// One spatial-temporal block: graph convolution, bottlenecked temporal
/// convolution and a residual connection.
#[derive(Debug, Clone)]
pub struct StgcnBlock {
    gcn: GraphConv,
    bn_gcn: BatchNorm,
    reduce: TemporalConv,
    bn_reduce: BatchNorm,
    temporal: TemporalConv,
    bn_temporal: BatchNorm,
    expand: TemporalConv,
    bn_expand: BatchNorm,
    shortcut: Option<Shortcut>,
}

pub struct BlockCache {
    gcn: GraphConvCache,
    bn_gcn: BatchNormCache,
    a1: Array4<f64>,
    reduce: TemporalConvCache,
    bn_reduce: BatchNormCache,
    a2: Array4<f64>,
    temporal: TemporalConvCache,
    bn_temporal: BatchNormCache,
    a3: Array4<f64>,
    expand: TemporalConvCache,
    bn_expand: BatchNormCache,
    shortcut: Option<(TemporalConvCache, BatchNormCache)>,
    out: Array4<f64>,
}

impl StgcnBlock {
    #[allow(clippy::too_many_arguments)]
    fn new<R: Rng + ?Sized>(
        adjacency: ndarray::Array3<f64>,
        cin: usize,
        cout: usize,
        mid: usize,
        kernel: usize,
        stride: usize,
        rng: &mut R,
    ) -> Self {
        let shortcut = (cin != cout || stride != 1).then(|| Shortcut {
            conv: TemporalConv::new(cin, cout, 1, stride, rng),
            bn: BatchNorm::new(cout),
        });
        StgcnBlock {
            gcn: GraphConv::new(adjacency, cin, cout, rng),
            bn_gcn: BatchNorm::new(cout),
            reduce: TemporalConv::new(cout, mid, 1, 1, rng),
            bn_reduce: BatchNorm::new(mid),
            temporal: TemporalConv::new(mid, mid, kernel, stride, rng),
            bn_temporal: BatchNorm::new(mid),
            expand: TemporalConv::new(mid, cout, 1, 1, rng),
            bn_expand: BatchNorm::new(cout),
            shortcut,
        }
    }

    fn forward(&self, x: &Array4<f64>) -> Array4<f64> {
        let h = relu4(self.bn_gcn.forward(&self.gcn.forward(x)));
        let h = relu4(self.bn_reduce.forward(&self.reduce.forward(&h)));
        let h = relu4(self.bn_temporal.forward(&self.temporal.forward(&h)));
        let mut h = self.bn_expand.forward(&self.expand.forward(&h));
        match &self.shortcut {
            Some(s) => h += &s.bn.forward(&s.conv.forward(x)),
            None => h += x,
        }
        relu4(h)
    }

    fn forward_train(&mut self, x: &Array4<f64>) -> (Array4<f64>, BlockCache) {
        let (h, gcn) = self.gcn.forward_train(x);
        let (h, bn_gcn) = self.bn_gcn.forward_train(&h);
        let a1 = relu4(h);
        let (h, reduce) = self.reduce.forward_train(&a1);
        let (h, bn_reduce) = self.bn_reduce.forward_train(&h);
        let a2 = relu4(h);
        let (h, temporal) = self.temporal.forward_train(&a2);
        let (h, bn_temporal) = self.bn_temporal.forward_train(&h);
        let a3 = relu4(h);
        let (h, expand) = self.expand.forward_train(&a3);
        let (mut h, bn_expand) = self.bn_expand.forward_train(&h);
        let shortcut = match &mut self.shortcut {
            Some(s) => {
                let (r, c1) = s.conv.forward_train(x);
                let (r, c2) = s.bn.forward_train(&r);
                h += &r;
                Some((c1, c2))
            }
            None => {
                h += x;
                None
            }
        };
        let out = relu4(h);
        let cache = BlockCache {
            gcn,
            bn_gcn,
            a1,
            reduce,
            bn_reduce,
            a2,
            temporal,
            bn_temporal,
            a3,
            expand,
            bn_expand,
            shortcut,
            out: out.clone(),
        };
        (out, cache)
    }

    fn backward(&mut self, cache: BlockCache, dout: &Array4<f64>) -> Array4<f64> {
        let d_sum = relu4_backward(&cache.out, dout);
        let mut dx = match (&mut self.shortcut, cache.shortcut) {
            (Some(s), Some((c1, c2))) => {
                let d = s.bn.backward(c2, &d_sum);
                s.conv.backward(c1, &d)
            }
            _ => d_sum.clone(),
        };
        let d = self.bn_expand.backward(cache.bn_expand, &d_sum);
        let d = self.expand.backward(cache.expand, &d);
        let d = relu4_backward(&cache.a3, &d);
        let d = self.bn_temporal.backward(cache.bn_temporal, &d);
        let d = self.temporal.backward(cache.temporal, &d);
        let d = relu4_backward(&cache.a2, &d);
        let d = self.bn_reduce.backward(cache.bn_reduce, &d);
        let d = self.reduce.backward(cache.reduce, &d);
        let d = relu4_backward(&cache.a1, &d);
        let d = self.bn_gcn.backward(cache.bn_gcn, &d);
        dx += &self.gcn.backward(cache.gcn, &d);
        dx
    }
}

impl Module for StgcnBlock {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, Slot<'_>)) {
        self.gcn.visit(&join(prefix, "gcn"), f);
        self.bn_gcn.visit(&join(prefix, "bn_gcn"), f);
        self.reduce.visit(&join(prefix, "reduce"), f);
        self.bn_reduce.visit(&join(prefix, "bn_reduce"), f);
        self.temporal.visit(&join(prefix, "temporal"), f);
        self.bn_temporal.visit(&join(prefix, "bn_temporal"), f);
        self.expand.visit(&join(prefix, "expand"), f);
        self.bn_expand.visit(&join(prefix, "bn_expand"), f);
        if let Some(s) = &self.shortcut {
            s.conv.visit(&join(prefix, "shortcut.conv"), f);
            s.bn.visit(&join(prefix, "shortcut.bn"), f);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, SlotMut<'_>)) {
        self.gcn.visit_mut(&join(prefix, "gcn"), f);
        self.bn_gcn.visit_mut(&join(prefix, "bn_gcn"), f);
        self.reduce.visit_mut(&join(prefix, "reduce"), f);
        self.bn_reduce.visit_mut(&join(prefix, "bn_reduce"), f);
        self.temporal.visit_mut(&join(prefix, "temporal"), f);
        self.bn_temporal.visit_mut(&join(prefix, "bn_temporal"), f);
        self.expand.visit_mut(&join(prefix, "expand"), f);
        self.bn_expand.visit_mut(&join(prefix, "bn_expand"), f);
        if let Some(s) = &mut self.shortcut {
            s.conv.visit_mut(&join(prefix, "shortcut.conv"), f);
            s.bn.visit_mut(&join(prefix, "shortcut.bn"), f);
        }
    }
}

/// Stacked spatial-temporal blocks followed by global average pooling.
#[derive(Debug, Clone)]
pub struct Encoder {
    config: EncoderConfig,
    joint_count: usize,
    blocks: Vec<StgcnBlock>,
}

pub struct EncoderCache {
    blocks: Vec<BlockCache>,
    pooled_dims: (usize, usize, usize, usize),
}

impl Encoder {
    pub fn new<R: Rng + ?Sized>(config: EncoderConfig, graph: &SkeletonGraph, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let adjacency = normalized_adjacency(graph, config.partition_strategy)?;
        let mut cin = config.network_input_channels(graph.joint_count());
        let mut blocks = Vec::with_capacity(config.layer_channels.len());
        for (&cout, &stride) in config.layer_channels.iter().zip(&config.temporal_strides) {
            let mid = config.bottleneck_width(cout);
            blocks.push(StgcnBlock::new(
                adjacency.clone(),
                cin,
                cout,
                mid,
                config.temporal_kernel,
                stride,
                rng,
            ));
            cin = cout;
        }
        Ok(Encoder {
            config,
            joint_count: graph.joint_count(),
            blocks,
        })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn joint_count(&self) -> usize {
        self.joint_count
    }

    pub fn embedding_dim(&self) -> usize {
        self.config.embedding_dim
    }

    /// Checks a `B x T x J x C` coordinate batch and converts it to the
    /// network's layout, applying the rotation-invariant descriptor if enabled.
    fn prepare(&self, views: ArrayView4<'_, f64>) -> Result<Array4<f64>> {
        let (b, t, j, c) = views.dim();
        if b == 0 || t == 0 {
            return Err(Error::Shape(format!("empty batch {b}x{t}")));
        }
        if j != self.joint_count || c != self.config.in_channels {
            return Err(Error::Shape(format!(
                "views have {j} joints x {c} channels, encoder expects {} x {}",
                self.joint_count, self.config.in_channels
            )));
        }
        if self.config.use_ri {
            Ok(to_channels_first(ri_batch(views).view()))
        } else {
            Ok(to_channels_first(views))
        }
    }

    fn pool(x: &Array4<f64>) -> Array2<f64> {
        let (_, _, t, j) = x.dim();
        let summed = x.sum_axis(Axis(3)).sum_axis(Axis(2));
        (summed / (t * j) as f64).reversed_axes().as_standard_layout().into_owned()
    }

    /// Inference-mode embeddings, `B x embedding_dim`.
    pub fn forward(&self, views: ArrayView4<'_, f64>) -> Result<Array2<f64>> {
        let mut x = self.prepare(views)?;
        for block in &self.blocks {
            x = block.forward(&x);
        }
        Ok(Self::pool(&x))
    }

    /// Training-mode forward using batch statistics; updates running stats.
    pub fn forward_train(&mut self, views: ArrayView4<'_, f64>) -> Result<(Array2<f64>, EncoderCache)> {
        let mut x = self.prepare(views)?;
        let mut caches = Vec::with_capacity(self.blocks.len());
        for block in &mut self.blocks {
            let (y, cache) = block.forward_train(&x);
            caches.push(cache);
            x = y;
        }
        Ok((
            Self::pool(&x),
            EncoderCache {
                blocks: caches,
                pooled_dims: x.dim(),
            },
        ))
    }

    /// Accumulates parameter gradients given `dL/d embeddings`.
    pub fn backward(&mut self, cache: EncoderCache, d_embed: &Array2<f64>) {
        let (c, b, t, j) = cache.pooled_dims;
        let scale = 1.0 / (t * j) as f64;
        let mut d = Array4::zeros((c, b, t, j));
        for ((ci, bi, _, _), v) in d.indexed_iter_mut() {
            *v = d_embed[[bi, ci]] * scale;
        }
        for (block, bc) in self.blocks.iter_mut().zip(cache.blocks).rev() {
            d = block.backward(bc, &d);
        }
    }
}

impl Module for Encoder {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, Slot<'_>)) {
        for (i, b) in self.blocks.iter().enumerate() {
            b.visit(&join(prefix, &format!("block{i}")), f);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, SlotMut<'_>)) {
        for (i, b) in self.blocks.iter_mut().enumerate() {
            b.visit_mut(&join(prefix, &format!("block{i}")), f);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn default_config_is_valid() {
        EncoderConfig::default().validate().unwrap();
        assert_eq!(EncoderConfig::default().layer_channels.len(), 8);
    }

    #[test]
    fn rejects_even_kernel_and_width_mismatch() {
        let mut c = EncoderConfig::default();
        c.temporal_kernel = 4;
        assert!(c.validate().is_err());
        let mut c = EncoderConfig::default();
        c.embedding_dim = 128;
        assert!(c.validate().is_err());
    }

    #[test]
    fn output_shape_and_strides() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut cfg = EncoderConfig::tiny(vec![4, 6]);
        cfg.temporal_strides = vec![2, 1];
        let enc = Encoder::new(cfg, &SkeletonGraph::chain(3).unwrap(), &mut rng).unwrap();
        let x = Array4::from_shape_fn((5, 9, 3, 3), |(b, t, j, c)| ((b + t * j + c) as f64).sin());
        assert_eq!(enc.forward(x.view()).unwrap().dim(), (5, 6));
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let enc = Encoder::new(EncoderConfig::tiny(vec![4]), &SkeletonGraph::chain(3).unwrap(), &mut rng).unwrap();
        let x = Array4::zeros((2, 8, 4, 3));
        assert!(matches!(enc.forward(x.view()), Err(Error::Shape(_))));
    }
}
