//! Differentiable building blocks with hand-written backward passes.
//!
//! Activations use a channels-first `C x B x T x J` layout so that every
//! channel mix is a single matrix product over `B * T * J` columns and every
//! graph aggregation is a single product over the joint axis.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, Array3, Array4, ArrayD, ArrayView2, ArrayView4, Axis, Ix1, Ix2, IxDyn};
use rand::Rng;

/// Trainable tensor with its accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub value: ArrayD<f64>,
    pub grad: ArrayD<f64>,
}

impl Param {
    pub fn new(value: ArrayD<f64>) -> Self {
        let grad = ArrayD::zeros(value.raw_dim());
        Param { value, grad }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Param::new(ArrayD::zeros(IxDyn(shape)))
    }

    /// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn fan_in_uniform<R: Rng + ?Sized>(shape: &[usize], fan_in: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        let value = ArrayD::from_shape_simple_fn(IxDyn(shape), || rng.random_range(-bound..=bound));
        Param::new(value)
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    pub(crate) fn mat(&self) -> ArrayView2<'_, f64> {
        self.value.view().into_dimensionality::<Ix2>().expect("matrix parameter")
    }

    pub(crate) fn vec(&self) -> ndarray::ArrayView1<'_, f64> {
        self.value.view().into_dimensionality::<Ix1>().expect("vector parameter")
    }

    fn grad_mat(&mut self) -> ndarray::ArrayViewMut2<'_, f64> {
        self.grad.view_mut().into_dimensionality::<Ix2>().expect("matrix parameter")
    }

    fn grad_vec(&mut self) -> ndarray::ArrayViewMut1<'_, f64> {
        self.grad.view_mut().into_dimensionality::<Ix1>().expect("vector parameter")
    }
}

/// Borrowed view of a named state tensor.
pub enum Slot<'a> {
    Param(&'a Param),
    Buffer(&'a ArrayD<f64>),
}

pub enum SlotMut<'a> {
    Param(&'a mut Param),
    Buffer(&'a mut ArrayD<f64>),
}

/// Anything that owns parameters or buffers.
pub trait Module {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, Slot<'_>));
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, SlotMut<'_>));

    fn parameter_count(&self) -> usize {
        let mut n = 0;
        self.visit("", &mut |_, slot| {
            if let Slot::Param(p) = slot {
                n += p.len();
            }
        });
        n
    }

    fn zero_grad(&mut self) {
        self.visit_mut("", &mut |_, slot| {
            if let SlotMut::Param(p) = slot {
                p.zero_grad();
            }
        });
    }
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_owned()
    } else {
        format!("{prefix}.{name}")
    }
}

/// View a standard-layout `C x B x T x J` tensor as `C x (B*T*J)`.
fn as_rows(x: &Array4<f64>) -> ArrayView2<'_, f64> {
    let c = x.len_of(Axis(0));
    x.view().into_shape_with_order((c, x.len() / c)).expect("standard layout")
}

fn from_rows(rows: Array2<f64>, b: usize, t: usize, j: usize) -> Array4<f64> {
    let c = rows.nrows();
    rows.into_shape_with_order((c, b, t, j)).expect("row count matches")
}

fn add_bias(rows: &mut Array2<f64>, bias: ndarray::ArrayView1<'_, f64>) {
    for (mut row, &b) in rows.outer_iter_mut().zip(bias.iter()) {
        row += b;
    }
}

/// Spatial graph convolution: per-partition joint aggregation followed by a
/// shared channel mix, `y = sum_k W_k (x A_k) + b`.
///
/// `weight` is stored as `C_out x (K * C_in)`, partition-major along columns.
#[derive(Debug, Clone)]
pub struct GraphConv {
    pub weight: Param,
    pub bias: Param,
    adjacency: Array3<f64>,
    in_channels: usize,
}

pub struct GraphConvCache {
    aggregated: Array2<f64>,
    dims: (usize, usize, usize),
}

impl GraphConv {
    pub fn new<R: Rng + ?Sized>(adjacency: Array3<f64>, in_channels: usize, out_channels: usize, rng: &mut R) -> Self {
        let k = adjacency.len_of(Axis(0));
        let fan_in = k * in_channels;
        GraphConv {
            weight: Param::fan_in_uniform(&[out_channels, fan_in], fan_in, rng),
            bias: Param::fan_in_uniform(&[out_channels], fan_in, rng),
            adjacency,
            in_channels,
        }
    }

    pub fn adjacency(&self) -> &Array3<f64> {
        &self.adjacency
    }

    fn aggregate(&self, x: &Array4<f64>) -> Array2<f64> {
        let (c, b, t, j) = x.dim();
        let k = self.adjacency.len_of(Axis(0));
        let flat = x.view().into_shape_with_order((c * b * t, j)).expect("standard layout");
        let mut out = Array2::zeros((k * c, b * t * j));
        for p in 0..k {
            let agg = flat.dot(&self.adjacency.index_axis(Axis(0), p));
            let agg = agg.into_shape_with_order((c, b * t * j)).expect("contiguous");
            out.slice_mut(s![p * c..(p + 1) * c, ..]).assign(&agg);
        }
        out
    }

    fn mix(&self, aggregated: &Array2<f64>) -> Array2<f64> {
        let mut y = self.weight.mat().dot(aggregated);
        add_bias(&mut y, self.bias.vec());
        y
    }

    pub fn forward(&self, x: &Array4<f64>) -> Array4<f64> {
        let (_, b, t, j) = x.dim();
        from_rows(self.mix(&self.aggregate(x)), b, t, j)
    }

    pub fn forward_train(&self, x: &Array4<f64>) -> (Array4<f64>, GraphConvCache) {
        let (_, b, t, j) = x.dim();
        let aggregated = self.aggregate(x);
        let y = from_rows(self.mix(&aggregated), b, t, j);
        (y, GraphConvCache { aggregated, dims: (b, t, j) })
    }

    pub fn backward(&mut self, cache: GraphConvCache, dy: &Array4<f64>) -> Array4<f64> {
        let (b, t, j) = cache.dims;
        let dy_rows = as_rows(dy);
        general_mat_mul(1.0, &dy_rows, &cache.aggregated.t(), 1.0, &mut self.weight.grad_mat());
        self.bias.grad_vec().scaled_add(1.0, &dy_rows.sum_axis(Axis(1)));
        let d_agg = self.weight.mat().t().dot(&dy_rows);
        let c = self.in_channels;
        let k = self.adjacency.len_of(Axis(0));
        let mut dx = Array2::zeros((c * b * t, j));
        for p in 0..k {
            let block = d_agg.slice(s![p * c..(p + 1) * c, ..]);
            let block = block.to_owned().into_shape_with_order((c * b * t, j)).expect("contiguous");
            general_mat_mul(1.0, &block, &self.adjacency.index_axis(Axis(0), p).t(), 1.0, &mut dx);
        }
        dx.into_shape_with_order((c, b, t, j)).expect("contiguous")
    }
}

impl Module for GraphConv {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, Slot<'_>)) {
        f(&join(prefix, "weight"), Slot::Param(&self.weight));
        f(&join(prefix, "bias"), Slot::Param(&self.bias));
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, SlotMut<'_>)) {
        f(&join(prefix, "weight"), SlotMut::Param(&mut self.weight));
        f(&join(prefix, "bias"), SlotMut::Param(&mut self.bias));
    }
}

/// Convolution along the time axis with kernel `kernel x 1`, zero padding
/// `(kernel - 1) / 2` and the given stride. `kernel = 1` is a pointwise
/// channel mix.
#[derive(Debug, Clone)]
pub struct TemporalConv {
    /// `C_out x (C_in * kernel)`, tap-minor along columns.
    pub weight: Param,
    pub bias: Param,
    kernel: usize,
    stride: usize,
}

pub struct TemporalConvCache {
    columns: Array2<f64>,
    in_dims: (usize, usize, usize, usize),
    t_out: usize,
}

impl TemporalConv {
    pub fn new<R: Rng + ?Sized>(in_channels: usize, out_channels: usize, kernel: usize, stride: usize, rng: &mut R) -> Self {
        let fan_in = in_channels * kernel;
        TemporalConv {
            weight: Param::fan_in_uniform(&[out_channels, fan_in], fan_in, rng),
            bias: Param::fan_in_uniform(&[out_channels], fan_in, rng),
            kernel,
            stride,
        }
    }

    pub fn output_length(&self, t: usize) -> usize {
        let pad = (self.kernel - 1) / 2;
        (t + 2 * pad - self.kernel) / self.stride + 1
    }

    fn pointwise(&self) -> bool {
        self.kernel == 1 && self.stride == 1
    }

    fn columns(&self, x: &Array4<f64>) -> Array2<f64> {
        let (c, b, t, j) = x.dim();
        if self.pointwise() {
            return as_rows(x).to_owned();
        }
        let pad = (self.kernel - 1) / 2;
        let t_out = self.output_length(t);
        let mut cols = Array2::zeros((c * self.kernel, b * t_out * j));
        let src_all = x.as_slice().expect("standard layout");
        let dst_all = cols.as_slice_mut().expect("standard layout");
        let row_len = b * t_out * j;
        for ci in 0..c {
            for tap in 0..self.kernel {
                let row = &mut dst_all[(ci * self.kernel + tap) * row_len..][..row_len];
                for bi in 0..b {
                    let plane = &src_all[(ci * b + bi) * t * j..][..t * j];
                    for to in 0..t_out {
                        let src = (to * self.stride + tap) as isize - pad as isize;
                        if src < 0 || src >= t as isize {
                            continue;
                        }
                        let off = (bi * t_out + to) * j;
                        row[off..off + j].copy_from_slice(&plane[src as usize * j..][..j]);
                    }
                }
            }
        }
        cols
    }

    fn apply(&self, cols: &Array2<f64>, b: usize, t_out: usize, j: usize) -> Array4<f64> {
        let mut y = self.weight.mat().dot(cols);
        add_bias(&mut y, self.bias.vec());
        from_rows(y, b, t_out, j)
    }

    pub fn forward(&self, x: &Array4<f64>) -> Array4<f64> {
        let (_, b, t, j) = x.dim();
        self.apply(&self.columns(x), b, self.output_length(t), j)
    }

    pub fn forward_train(&self, x: &Array4<f64>) -> (Array4<f64>, TemporalConvCache) {
        let (_, b, t, j) = x.dim();
        let t_out = self.output_length(t);
        let columns = self.columns(x);
        let y = self.apply(&columns, b, t_out, j);
        (
            y,
            TemporalConvCache {
                columns,
                in_dims: x.dim(),
                t_out,
            },
        )
    }

    pub fn backward(&mut self, cache: TemporalConvCache, dy: &Array4<f64>) -> Array4<f64> {
        let dy_rows = as_rows(dy);
        general_mat_mul(1.0, &dy_rows, &cache.columns.t(), 1.0, &mut self.weight.grad_mat());
        self.bias.grad_vec().scaled_add(1.0, &dy_rows.sum_axis(Axis(1)));
        let dcols = self.weight.mat().t().dot(&dy_rows);
        let (c, b, t, j) = cache.in_dims;
        if self.pointwise() {
            return from_rows(dcols, b, t, j);
        }
        let pad = (self.kernel - 1) / 2;
        let t_out = cache.t_out;
        let mut dx = Array4::zeros((c, b, t, j));
        let dst_all = dx.as_slice_mut().expect("standard layout");
        let src_all = dcols.as_slice().expect("standard layout");
        let row_len = b * t_out * j;
        for ci in 0..c {
            for tap in 0..self.kernel {
                let row = &src_all[(ci * self.kernel + tap) * row_len..][..row_len];
                for bi in 0..b {
                    let plane = &mut dst_all[(ci * b + bi) * t * j..][..t * j];
                    for to in 0..t_out {
                        let src = (to * self.stride + tap) as isize - pad as isize;
                        if src < 0 || src >= t as isize {
                            continue;
                        }
                        let off = (bi * t_out + to) * j;
                        for (d, g) in plane[src as usize * j..][..j].iter_mut().zip(&row[off..off + j]) {
                            *d += g;
                        }
                    }
                }
            }
        }
        dx
    }
}

impl Module for TemporalConv {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, Slot<'_>)) {
        f(&join(prefix, "weight"), Slot::Param(&self.weight));
        f(&join(prefix, "bias"), Slot::Param(&self.bias));
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, SlotMut<'_>)) {
        f(&join(prefix, "weight"), SlotMut::Param(&mut self.weight));
        f(&join(prefix, "bias"), SlotMut::Param(&mut self.bias));
    }
}

/// Per-channel batch normalization over the `B x T x J` positions.
#[derive(Debug, Clone)]
pub struct BatchNorm {
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: ArrayD<f64>,
    pub running_var: ArrayD<f64>,
    pub momentum: f64,
    pub eps: f64,
}

pub struct BatchNormCache {
    normalized: Array2<f64>,
    inv_std: Array1<f64>,
    dims: (usize, usize, usize),
}

impl BatchNorm {
    pub fn new(channels: usize) -> Self {
        BatchNorm {
            gamma: Param::new(ArrayD::ones(IxDyn(&[channels]))),
            beta: Param::zeros(&[channels]),
            running_mean: ArrayD::zeros(IxDyn(&[channels])),
            running_var: ArrayD::ones(IxDyn(&[channels])),
            momentum: 0.1,
            eps: 1e-5,
        }
    }

    pub fn forward(&self, x: &Array4<f64>) -> Array4<f64> {
        let mut y = x.clone();
        let gamma = self.gamma.vec();
        let beta = self.beta.vec();
        for (c, mut chan) in y.outer_iter_mut().enumerate() {
            let scale = gamma[c] / (self.running_var[[c]] + self.eps).sqrt();
            let shift = beta[c] - self.running_mean[[c]] * scale;
            chan.mapv_inplace(|v| v * scale + shift);
        }
        y
    }

    pub fn forward_train(&mut self, x: &Array4<f64>) -> (Array4<f64>, BatchNormCache) {
        let (c, b, t, j) = x.dim();
        let rows = as_rows(x);
        let n = rows.ncols() as f64;
        let mut normalized = Array2::zeros(rows.raw_dim());
        let mut inv_std = Array1::zeros(c);
        for ch in 0..c {
            let row = rows.row(ch);
            let mean = row.sum() / n;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let is = 1.0 / (var + self.eps).sqrt();
            inv_std[ch] = is;
            normalized.row_mut(ch).assign(&row.mapv(|v| (v - mean) * is));
            let unbiased = if n > 1.0 { var * n / (n - 1.0) } else { var };
            self.running_mean[[ch]] = (1.0 - self.momentum) * self.running_mean[[ch]] + self.momentum * mean;
            self.running_var[[ch]] = (1.0 - self.momentum) * self.running_var[[ch]] + self.momentum * unbiased;
        }
        let mut y = normalized.clone();
        let gamma = self.gamma.vec();
        let beta = self.beta.vec();
        for (ch, mut row) in y.outer_iter_mut().enumerate() {
            row.mapv_inplace(|v| v * gamma[ch] + beta[ch]);
        }
        (
            from_rows(y, b, t, j),
            BatchNormCache {
                normalized,
                inv_std,
                dims: (b, t, j),
            },
        )
    }

    pub fn backward(&mut self, cache: BatchNormCache, dy: &Array4<f64>) -> Array4<f64> {
        let (b, t, j) = cache.dims;
        let dy_rows = as_rows(dy);
        let n = dy_rows.ncols() as f64;
        let mut dx = Array2::zeros(dy_rows.raw_dim());
        let gamma = self.gamma.value.clone();
        for ch in 0..dy_rows.nrows() {
            let g = dy_rows.row(ch);
            let xhat = cache.normalized.row(ch);
            let sum_g = g.sum();
            let sum_gx = g.dot(&xhat);
            self.gamma.grad[[ch]] += sum_gx;
            self.beta.grad[[ch]] += sum_g;
            let k = gamma[[ch]] * cache.inv_std[ch] / n;
            ndarray::Zip::from(dx.row_mut(ch))
                .and(&g)
                .and(&xhat)
                .for_each(|d, &gv, &xv| *d = k * (n * gv - sum_g - xv * sum_gx));
        }
        from_rows(dx, b, t, j)
    }
}

impl Module for BatchNorm {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, Slot<'_>)) {
        f(&join(prefix, "gamma"), Slot::Param(&self.gamma));
        f(&join(prefix, "beta"), Slot::Param(&self.beta));
        f(&join(prefix, "running_mean"), Slot::Buffer(&self.running_mean));
        f(&join(prefix, "running_var"), Slot::Buffer(&self.running_var));
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, SlotMut<'_>)) {
        f(&join(prefix, "gamma"), SlotMut::Param(&mut self.gamma));
        f(&join(prefix, "beta"), SlotMut::Param(&mut self.beta));
        f(&join(prefix, "running_mean"), SlotMut::Buffer(&mut self.running_mean));
        f(&join(prefix, "running_var"), SlotMut::Buffer(&mut self.running_var));
    }
}

pub fn relu4(mut x: Array4<f64>) -> Array4<f64> {
    x.mapv_inplace(|v| v.max(0.0));
    x
}

/// Gradient through a ReLU given its output.
pub fn relu4_backward(output: &Array4<f64>, dy: &Array4<f64>) -> Array4<f64> {
    let mut dx = dy.clone();
    ndarray::Zip::from(&mut dx).and(output).for_each(|d, &o| {
        if o <= 0.0 {
            *d = 0.0;
        }
    });
    dx
}

/// Fully-connected affine map on row vectors: `y = x W^T + b`.
#[derive(Debug, Clone)]
pub struct Linear {
    /// `out x in`.
    pub weight: Param,
    pub bias: Param,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        Linear {
            weight: Param::fan_in_uniform(&[out_dim, in_dim], in_dim, rng),
            bias: Param::fan_in_uniform(&[out_dim], in_dim, rng),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.value.shape()[1]
    }

    pub fn out_dim(&self) -> usize {
        self.weight.value.shape()[0]
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut y = x.dot(&self.weight.mat().t());
        y += &self.bias.vec();
        y
    }

    /// Accumulates parameter gradients and returns `dL/dx`.
    pub fn backward(&mut self, x: ArrayView2<'_, f64>, dy: ArrayView2<'_, f64>) -> Array2<f64> {
        general_mat_mul(1.0, &dy.t(), &x, 1.0, &mut self.weight.grad_mat());
        self.bias.grad_vec().scaled_add(1.0, &dy.sum_axis(Axis(0)));
        dy.dot(&self.weight.mat())
    }
}

impl Module for Linear {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, Slot<'_>)) {
        f(&join(prefix, "weight"), Slot::Param(&self.weight));
        f(&join(prefix, "bias"), Slot::Param(&self.bias));
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, SlotMut<'_>)) {
        f(&join(prefix, "weight"), SlotMut::Param(&mut self.weight));
        f(&join(prefix, "bias"), SlotMut::Param(&mut self.bias));
    }
}

/// `B x T x J x C` views to the network's `C x B x T x J` layout.
pub fn to_channels_first(views: ArrayView4<'_, f64>) -> Array4<f64> {
    views.permuted_axes([3, 0, 1, 2]).as_standard_layout().into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random4(shape: (usize, usize, usize, usize), rng: &mut ChaCha8Rng) -> Array4<f64> {
        Array4::from_shape_simple_fn(shape, || rng.random_range(-1.0..1.0))
    }

    /// Checks `backward` against central differences of `sum(y * probe)`.
    fn check_input_grad(
        forward: &dyn Fn(&Array4<f64>) -> Array4<f64>,
        backward: &mut dyn FnMut(&Array4<f64>, &Array4<f64>) -> Array4<f64>,
        x: &Array4<f64>,
        rng: &mut ChaCha8Rng,
    ) {
        let y = forward(x);
        let probe = random4(y.dim(), rng);
        let dx = backward(x, &probe);
        let h = 1e-6;
        for idx in [0usize, x.len() / 3, x.len() / 2, x.len() - 1] {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp.as_slice_mut().unwrap()[idx] += h;
            xm.as_slice_mut().unwrap()[idx] -= h;
            let fd = ((&forward(&xp) * &probe).sum() - (&forward(&xm) * &probe).sum()) / (2.0 * h);
            let an = dx.as_slice().unwrap()[idx];
            assert!((fd - an).abs() < 1e-6 * (1.0 + fd.abs()), "idx {idx}: fd {fd} vs {an}");
        }
    }

    #[test]
    fn temporal_conv_input_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random4((3, 2, 7, 4), &mut rng);
        for (k, s) in [(1, 1), (3, 1), (5, 2), (1, 2)] {
            let conv = TemporalConv::new(3, 4, k, s, &mut rng);
            let mut conv_b = conv.clone();
            check_input_grad(
                &|x| conv.forward(x),
                &mut |x, g| {
                    let (_, cache) = conv_b.forward_train(x);
                    conv_b.backward(cache, g)
                },
                &x,
                &mut rng,
            );
        }
    }

    #[test]
    fn strided_output_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let conv = TemporalConv::new(1, 1, 9, 2, &mut rng);
        assert_eq!(conv.output_length(64), 32);
        assert_eq!(conv.output_length(7), 4);
        let pw = TemporalConv::new(1, 1, 1, 2, &mut rng);
        assert_eq!(pw.output_length(7), 4);
    }

    #[test]
    fn graph_conv_input_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = crate::skeleton::SkeletonGraph::chain(4).unwrap();
        let a = crate::model::normalized_adjacency(&g, crate::model::PartitionStrategy::Spatial).unwrap();
        let gc = GraphConv::new(a, 3, 5, &mut rng);
        let mut gc_b = gc.clone();
        let x = random4((3, 2, 5, 4), &mut rng);
        check_input_grad(
            &|x| gc.forward(x),
            &mut |x, g| {
                let (_, cache) = gc_b.forward_train(x);
                gc_b.backward(cache, g)
            },
            &x,
            &mut rng,
        );
    }

    #[test]
    fn batch_norm_input_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut bn = BatchNorm::new(3);
        bn.gamma.value = ArrayD::from_shape_vec(IxDyn(&[3]), vec![0.5, 1.5, -1.0]).unwrap();
        let x = random4((3, 2, 4, 3), &mut rng);
        let bn_f = bn.clone();
        check_input_grad(
            &|x| bn_f.clone().forward_train(x).0,
            &mut |x, g| {
                let (_, cache) = bn.forward_train(x);
                bn.backward(cache, g)
            },
            &x,
            &mut rng,
        );
    }

    #[test]
    fn linear_is_linear_without_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut lin = Linear::new(4, 3, &mut rng);
        lin.bias.value.fill(0.0);
        let u = Array2::from_shape_simple_fn((2, 4), || rng.random_range(-1.0..1.0));
        let v = Array2::from_shape_simple_fn((2, 4), || rng.random_range(-1.0..1.0));
        let lhs = lin.forward((&u + &v).view());
        let rhs = lin.forward(u.view()) + lin.forward(v.view());
        assert!(lhs.iter().zip(rhs.iter()).all(|(a, b)| (a - b).abs() < 1e-12));
    }
}
