use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};

/// Activation tensor of a 1-D network: `len` positions by `channels` channels,
/// stored position-major (`data[pos * channels + ch]`).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    data: Vec<f64>,
    len: usize,
    channels: usize,
}

impl FeatureMap {
    pub fn new(data: Vec<f64>, len: usize, channels: usize) -> Result<Self> {
        if len == 0 || channels == 0 {
            return Err(Error::InvalidInput(format!(
                "feature map needs positive length and channels, got {len}x{channels}"
            )));
        }
        if data.len() != len * channels {
            return Err(shape_err("FeatureMap::new", len * channels, data.len()));
        }
        Ok(Self {
            data,
            len,
            channels,
        })
    }

    pub fn zeros(len: usize, channels: usize) -> Self {
        Self {
            data: vec![0.0; len * channels],
            len,
            channels,
        }
    }

    /// Single-channel signal of length `data.len()`.
    pub fn signal(data: Vec<f64>) -> Result<Self> {
        let len = data.len();
        Self::new(data, len, 1)
    }

    /// Flat vector, shaped as one position with `data.len()` channels.
    pub fn vector(data: Vec<f64>) -> Result<Self> {
        let n = data.len();
        Self::new(data, 1, n)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.len, self.channels)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LayerKind {
    Conv1D,
    MaxPool1D,
    ReLU,
    Dense,
}

/// Static description of one layer. Convolution is valid (unpadded)
/// cross-correlation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum LayerSpec {
    Conv1D {
        kernel: usize,
        stride: usize,
        in_channels: usize,
        out_channels: usize,
    },
    MaxPool1D {
        kernel: usize,
        stride: usize,
        channels: usize,
    },
    ReLU,
    Dense {
        in_dim: usize,
        out_dim: usize,
    },
}

fn windowed_len(len: usize, kernel: usize, stride: usize) -> Result<usize> {
    if kernel == 0 || stride == 0 {
        return Err(Error::InvalidInput(format!(
            "kernel ({kernel}) and stride ({stride}) must be positive"
        )));
    }
    if kernel > len {
        return Err(Error::InvalidInput(format!(
            "kernel {kernel} exceeds input length {len}"
        )));
    }
    Ok((len - kernel) / stride + 1)
}

impl LayerSpec {
    pub fn kind(&self) -> LayerKind {
        match self {
            LayerSpec::Conv1D { .. } => LayerKind::Conv1D,
            LayerSpec::MaxPool1D { .. } => LayerKind::MaxPool1D,
            LayerSpec::ReLU => LayerKind::ReLU,
            LayerSpec::Dense { .. } => LayerKind::Dense,
        }
    }

    /// Output `(len, channels)` for an input of shape `(len, channels)`.
    pub fn output_shape(&self, input: (usize, usize)) -> Result<(usize, usize)> {
        let (len, ch) = input;
        match *self {
            LayerSpec::Conv1D {
                kernel,
                stride,
                in_channels,
                out_channels,
            } => {
                if ch != in_channels {
                    return Err(shape_err("Conv1D input channels", in_channels, ch));
                }
                Ok((windowed_len(len, kernel, stride)?, out_channels))
            }
            LayerSpec::MaxPool1D {
                kernel,
                stride,
                channels,
            } => {
                if ch != channels {
                    return Err(shape_err("MaxPool1D input channels", channels, ch));
                }
                Ok((windowed_len(len, kernel, stride)?, channels))
            }
            LayerSpec::ReLU => Ok(input),
            LayerSpec::Dense { in_dim, out_dim } => {
                if len * ch != in_dim {
                    return Err(shape_err("Dense input size", in_dim, len * ch));
                }
                Ok((1, out_dim))
            }
        }
    }

    /// `(weights, biases)` array lengths.
    pub fn param_lens(&self) -> (usize, usize) {
        match *self {
            LayerSpec::Conv1D {
                kernel,
                in_channels,
                out_channels,
                ..
            } => (kernel * in_channels * out_channels, out_channels),
            LayerSpec::Dense { in_dim, out_dim } => (in_dim * out_dim, out_dim),
            LayerSpec::MaxPool1D { .. } | LayerSpec::ReLU => (0, 0),
        }
    }

    pub fn has_params(&self) -> bool {
        self.param_lens().0 > 0
    }

    pub fn fan_in(&self) -> usize {
        match *self {
            LayerSpec::Conv1D {
                kernel,
                in_channels,
                ..
            } => kernel * in_channels,
            LayerSpec::Dense { in_dim, .. } => in_dim,
            _ => 0,
        }
    }
}

/// Weights and biases of one layer. Conv weights are laid out
/// `[kernel][in_channels][out_channels]`, dense weights `[in_dim][out_dim]`.
/// The same type carries gradients.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LayerParams {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Gradient of a scalar loss with respect to a [`LayerParams`].
pub type GradientBundle = LayerParams;

impl LayerParams {
    pub fn zeros(spec: &LayerSpec) -> Self {
        let (w, b) = spec.param_lens();
        Self {
            weights: vec![0.0; w],
            biases: vec![0.0; b],
        }
    }

    /// He-normal weights (variance 2 / fan_in), zero biases.
    pub fn he_init<R: Rng + ?Sized>(spec: &LayerSpec, rng: &mut R) -> Self {
        let mut p = Self::zeros(spec);
        if spec.has_params() {
            let std = (2.0 / spec.fan_in() as f64).sqrt();
            let normal = Normal::new(0.0, std).expect("positive std");
            for w in p.weights.iter_mut() {
                *w = normal.sample(rng);
            }
        }
        p
    }

    pub fn len(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn check_for(&self, spec: &LayerSpec) -> Result<()> {
        let (w, b) = spec.param_lens();
        if self.weights.len() != w || self.biases.len() != b {
            return Err(shape_err(
                "layer params",
                format!("{w}+{b}"),
                format!("{}+{}", self.weights.len(), self.biases.len()),
            ));
        }
        Ok(())
    }

    pub fn same_shape(&self, other: &LayerParams) -> bool {
        self.weights.len() == other.weights.len() && self.biases.len() == other.biases.len()
    }

    pub fn add_assign(&mut self, other: &LayerParams) {
        debug_assert!(self.same_shape(other));
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.weights.iter_mut().for_each(|w| *w *= s);
        self.biases.iter_mut().for_each(|b| *b *= s);
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(self.biases.iter())
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().chain(self.biases.iter_mut())
    }
}

/// What `layer_backward` needs from the matching `layer_forward` call.
#[derive(Debug, Clone)]
pub struct LayerCache {
    spec: LayerSpec,
    input_shape: (usize, usize),
    output_shape: (usize, usize),
    state: CacheState,
}

#[derive(Debug, Clone)]
enum CacheState {
    Input(Vec<f64>),
    Argmax(Vec<usize>),
    Mask(Vec<bool>),
}

impl LayerCache {
    pub fn spec(&self) -> &LayerSpec {
        &self.spec
    }

    pub fn input_shape(&self) -> (usize, usize) {
        self.input_shape
    }

    pub fn output_shape(&self) -> (usize, usize) {
        self.output_shape
    }

    /// Input positions selected by a max-pool forward, `[out_pos][channel]`.
    pub fn argmax(&self) -> Option<&[usize]> {
        match &self.state {
            CacheState::Argmax(a) => Some(a),
            _ => None,
        }
    }
}

/// Strided matrix operand: `rows x cols` with element `(i, j)` at
/// `data[i * row_stride + j * col_stride]`.
#[derive(Clone, Copy)]
struct MatRef<'a> {
    data: &'a [f64],
    rows: usize,
    cols: usize,
    row_stride: usize,
    col_stride: usize,
}

impl<'a> MatRef<'a> {
    fn new(
        data: &'a [f64],
        rows: usize,
        cols: usize,
        row_stride: usize,
        col_stride: usize,
    ) -> Self {
        if rows > 0 && cols > 0 {
            let last = (rows - 1) * row_stride + (cols - 1) * col_stride;
            assert!(last < data.len(), "matrix view out of bounds");
        }
        Self {
            data,
            rows,
            cols,
            row_stride,
            col_stride,
        }
    }

    fn t(self) -> Self {
        Self {
            rows: self.cols,
            cols: self.rows,
            row_stride: self.col_stride,
            col_stride: self.row_stride,
            ..self
        }
    }
}

/// `c = a * b + beta * c` with `c` dense row-major.
fn gemm(a: MatRef<'_>, b: MatRef<'_>, beta: f64, c: &mut [f64]) {
    assert_eq!(a.cols, b.rows);
    assert_eq!(c.len(), a.rows * b.cols);
    if a.rows == 0 || b.cols == 0 {
        return;
    }
    // SAFETY: every view was bounds-checked on construction and `c` has
    // exactly `a.rows * b.cols` elements addressed row-major.
    unsafe {
        matrixmultiply::dgemm(
            a.rows,
            a.cols,
            b.cols,
            1.0,
            a.data.as_ptr(),
            a.row_stride as isize,
            a.col_stride as isize,
            b.data.as_ptr(),
            b.row_stride as isize,
            b.col_stride as isize,
            beta,
            c.as_mut_ptr(),
            b.cols as isize,
            1,
        );
    }
}

/// Affine map of `batch` row-major inputs: `y = x W + b`.
pub(crate) fn dense_forward_rows(
    x: &[f64],
    batch: usize,
    in_dim: usize,
    out_dim: usize,
    params: &LayerParams,
) -> Vec<f64> {
    let mut y = Vec::with_capacity(batch * out_dim);
    for _ in 0..batch {
        y.extend_from_slice(&params.biases);
    }
    gemm(
        MatRef::new(x, batch, in_dim, in_dim, 1),
        MatRef::new(&params.weights, in_dim, out_dim, out_dim, 1),
        1.0,
        &mut y,
    );
    y
}

/// Backward of [`dense_forward_rows`]: returns `(dx, grads)` with gradients
/// summed over the batch.
pub(crate) fn dense_backward_rows(
    x: &[f64],
    g: &[f64],
    batch: usize,
    in_dim: usize,
    out_dim: usize,
    params: &LayerParams,
    need_input_grad: bool,
    need_param_grads: bool,
) -> (Option<Vec<f64>>, LayerParams) {
    let mut grads = LayerParams::default();
    if need_param_grads {
        grads.weights = vec![0.0; in_dim * out_dim];
        gemm(
            MatRef::new(x, batch, in_dim, in_dim, 1).t(),
            MatRef::new(g, batch, out_dim, out_dim, 1),
            0.0,
            &mut grads.weights,
        );
        grads.biases = vec![0.0; out_dim];
        for row in g.chunks_exact(out_dim) {
            for (b, &v) in grads.biases.iter_mut().zip(row) {
                *b += v;
            }
        }
    }
    let dx = need_input_grad.then(|| {
        let mut dx = vec![0.0; batch * in_dim];
        gemm(
            MatRef::new(g, batch, out_dim, out_dim, 1),
            MatRef::new(&params.weights, in_dim, out_dim, out_dim, 1).t(),
            0.0,
            &mut dx,
        );
        dx
    });
    (dx, grads)
}

pub fn layer_forward(
    spec: &LayerSpec,
    params: &LayerParams,
    input: &FeatureMap,
) -> Result<(FeatureMap, LayerCache)> {
    params.check_for(spec)?;
    let in_shape = input.shape();
    let out_shape = spec.output_shape(in_shape)?;
    let x = input.data();
    let (out, state) = match *spec {
        LayerSpec::Conv1D {
            kernel,
            stride,
            in_channels,
            out_channels,
        } => {
            // Row p of the window matrix is x[p*stride*cin .. +kernel*cin],
            // a strided view with no copy.
            let rows = out_shape.0;
            let row = kernel * in_channels;
            let mut out = Vec::with_capacity(rows * out_channels);
            for _ in 0..rows {
                out.extend_from_slice(&params.biases);
            }
            gemm(
                MatRef::new(x, rows, row, stride * in_channels, 1),
                MatRef::new(&params.weights, row, out_channels, out_channels, 1),
                1.0,
                &mut out,
            );
            (out, CacheState::Input(x.to_vec()))
        }
        LayerSpec::MaxPool1D {
            kernel,
            stride,
            channels,
        } => {
            let n = out_shape.0 * channels;
            let mut out = vec![0.0; n];
            let mut argmax = vec![0usize; n];
            for p in 0..out_shape.0 {
                for c in 0..channels {
                    let first = p * stride;
                    let mut best = first;
                    let mut best_v = x[first * channels + c];
                    for pos in first + 1..first + kernel {
                        let v = x[pos * channels + c];
                        if v > best_v {
                            best_v = v;
                            best = pos;
                        }
                    }
                    out[p * channels + c] = best_v;
                    argmax[p * channels + c] = best;
                }
            }
            (out, CacheState::Argmax(argmax))
        }
        LayerSpec::ReLU => {
            let mask: Vec<bool> = x.iter().map(|&v| v > 0.0).collect();
            let out = x.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect();
            (out, CacheState::Mask(mask))
        }
        LayerSpec::Dense { in_dim, out_dim } => (
            dense_forward_rows(x, 1, in_dim, out_dim, params),
            CacheState::Input(x.to_vec()),
        ),
    };
    let output = FeatureMap::new(out, out_shape.0, out_shape.1)?;
    Ok((
        output,
        LayerCache {
            spec: *spec,
            input_shape: in_shape,
            output_shape: out_shape,
            state,
        },
    ))
}

pub fn layer_backward(
    spec: &LayerSpec,
    params: &LayerParams,
    cache: &LayerCache,
    upstream: &FeatureMap,
) -> Result<(FeatureMap, GradientBundle)> {
    let (dx, grads) = backward_impl(spec, params, cache, upstream, true)?;
    Ok((dx.expect("input gradient requested"), grads))
}

/// Backward pass that may skip the input gradient (first trainable layer).
pub(crate) fn backward_impl(
    spec: &LayerSpec,
    params: &LayerParams,
    cache: &LayerCache,
    upstream: &FeatureMap,
    need_input_grad: bool,
) -> Result<(Option<FeatureMap>, GradientBundle)> {
    if cache.spec != *spec {
        return Err(Error::InvalidInput(format!(
            "stale cache: recorded for {:?}, used with {:?}",
            cache.spec, spec
        )));
    }
    params.check_for(spec)?;
    if upstream.shape() != cache.output_shape {
        return Err(shape_err(
            "upstream gradient",
            format!("{:?}", cache.output_shape),
            format!("{:?}", upstream.shape()),
        ));
    }
    let (in_len, in_ch) = cache.input_shape;
    let g = upstream.data();
    let mut grads = LayerParams::zeros(spec);
    let mut dx = if need_input_grad {
        Some(vec![0.0; in_len * in_ch])
    } else {
        None
    };
    match (*spec, &cache.state) {
        (
            LayerSpec::Conv1D {
                kernel,
                stride,
                in_channels,
                out_channels,
            },
            CacheState::Input(x),
        ) => {
            let rows = cache.output_shape.0;
            let row = kernel * in_channels;
            let step = stride * in_channels;
            let windows = MatRef::new(x, rows, row, step, 1);
            let gmat = MatRef::new(g, rows, out_channels, out_channels, 1);
            gemm(windows.t(), gmat, 0.0, &mut grads.weights);
            for gp in g.chunks_exact(out_channels) {
                for (db, &gv) in grads.biases.iter_mut().zip(gp) {
                    *db += gv;
                }
            }
            if let Some(dx) = dx.as_mut() {
                let mut dcols = vec![0.0; rows * row];
                gemm(
                    gmat,
                    MatRef::new(&params.weights, row, out_channels, out_channels, 1).t(),
                    0.0,
                    &mut dcols,
                );
                for (p, dc) in dcols.chunks_exact(row).enumerate() {
                    for (d, &v) in dx[p * step..p * step + row].iter_mut().zip(dc) {
                        *d += v;
                    }
                }
            }
        }
        (LayerSpec::MaxPool1D { channels, .. }, CacheState::Argmax(argmax)) => {
            if let Some(dx) = dx.as_mut() {
                for (i, (&pos, &gv)) in argmax.iter().zip(g).enumerate() {
                    dx[pos * channels + i % channels] += gv;
                }
            }
        }
        (LayerSpec::ReLU, CacheState::Mask(mask)) => {
            if let Some(dx) = dx.as_mut() {
                for ((d, &m), &gv) in dx.iter_mut().zip(mask).zip(g) {
                    if m {
                        *d = gv;
                    }
                }
            }
        }
        (LayerSpec::Dense { in_dim, out_dim }, CacheState::Input(x)) => {
            let (d, p) =
                dense_backward_rows(x, g, 1, in_dim, out_dim, params, need_input_grad, true);
            grads = p;
            dx = d;
        }
        _ => {
            return Err(Error::InvalidInput(
                "cache state does not match layer kind".into(),
            ))
        }
    }
    let dx = dx.map(|d| FeatureMap::new(d, in_len, in_ch)).transpose()?;
    Ok((dx, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn conv(kernel: usize, stride: usize, cin: usize, cout: usize) -> LayerSpec {
        LayerSpec::Conv1D {
            kernel,
            stride,
            in_channels: cin,
            out_channels: cout,
        }
    }

    #[test]
    fn conv1_shape_matches_table() {
        let spec = conv(32, 2, 1, 8);
        let params = LayerParams::he_init(&spec, &mut rng::stream(1, rng::INIT));
        let input = FeatureMap::signal(vec![0.5; 2048]).unwrap();
        let (out, _) = layer_forward(&spec, &params, &input).unwrap();
        assert_eq!(out.shape(), (1009, 8));
    }

    #[test]
    fn identity_kernel_passes_input_through() {
        let spec = conv(1, 1, 1, 1);
        let params = LayerParams {
            weights: vec![1.0],
            biases: vec![0.0],
        };
        let input = FeatureMap::signal(vec![0.3, -1.0, 7.5, 2.0]).unwrap();
        let (out, _) = layer_forward(&spec, &params, &input).unwrap();
        assert_eq!(out, input);
    }

    #[test]
    fn difference_kernel_cross_correlates() {
        let spec = conv(3, 1, 1, 1);
        let params = LayerParams {
            weights: vec![1.0, 0.0, -1.0],
            biases: vec![0.0],
        };
        let input = FeatureMap::signal(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (out, _) = layer_forward(&spec, &params, &input).unwrap();
        assert_eq!(out.data(), &[-2.0, -2.0]);
    }

    #[test]
    fn max_pool_records_argmax() {
        let spec = LayerSpec::MaxPool1D {
            kernel: 2,
            stride: 2,
            channels: 1,
        };
        let input = FeatureMap::signal(vec![1.0, 3.0, 2.0, 0.0]).unwrap();
        let (out, cache) = layer_forward(&spec, &LayerParams::default(), &input).unwrap();
        assert_eq!(out.data(), &[3.0, 2.0]);
        assert_eq!(cache.argmax().unwrap(), &[1, 2]);
    }

    #[test]
    fn relu_backward_masks() {
        let input = FeatureMap::signal(vec![-1.0, 2.0]).unwrap();
        let (_, cache) = layer_forward(&LayerSpec::ReLU, &LayerParams::default(), &input).unwrap();
        let up = FeatureMap::signal(vec![5.0, 5.0]).unwrap();
        let (dx, _) =
            layer_backward(&LayerSpec::ReLU, &LayerParams::default(), &cache, &up).unwrap();
        assert_eq!(dx.data(), &[0.0, 5.0]);
    }

    #[test]
    fn kernel_longer_than_input_is_rejected() {
        let spec = conv(8, 1, 1, 1);
        let params = LayerParams::zeros(&spec);
        let input = FeatureMap::signal(vec![1.0; 4]).unwrap();
        assert!(matches!(
            layer_forward(&spec, &params, &input),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn channel_mismatch_is_rejected() {
        let spec = conv(2, 1, 3, 1);
        let params = LayerParams::zeros(&spec);
        let input = FeatureMap::new(vec![1.0; 8], 4, 2).unwrap();
        assert!(matches!(
            layer_forward(&spec, &params, &input),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn bad_param_lengths_are_rejected() {
        let spec = LayerSpec::Dense {
            in_dim: 3,
            out_dim: 2,
        };
        let params = LayerParams {
            weights: vec![0.0; 5],
            biases: vec![0.0; 2],
        };
        let input = FeatureMap::vector(vec![1.0; 3]).unwrap();
        assert!(layer_forward(&spec, &params, &input).is_err());
    }

    #[test]
    fn stale_cache_is_rejected() {
        let dense = LayerSpec::Dense {
            in_dim: 2,
            out_dim: 2,
        };
        let params = LayerParams::zeros(&dense);
        let input = FeatureMap::vector(vec![1.0, -1.0]).unwrap();
        let (_, relu_cache) =
            layer_forward(&LayerSpec::ReLU, &LayerParams::default(), &input).unwrap();
        let up = FeatureMap::vector(vec![1.0, 1.0]).unwrap();
        assert!(matches!(
            layer_backward(&dense, &params, &relu_cache, &up),
            Err(Error::InvalidInput(_))
        ));
        // Right kind, wrong upstream shape.
        let (_, cache) = layer_forward(&dense, &params, &input).unwrap();
        let bad = FeatureMap::vector(vec![1.0; 3]).unwrap();
        assert!(layer_backward(&dense, &params, &cache, &bad).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let specs = [
            conv(3, 2, 2, 4),
            LayerSpec::MaxPool1D {
                kernel: 2,
                stride: 2,
                channels: 2,
            },
            LayerSpec::ReLU,
            LayerSpec::Dense {
                in_dim: 18,
                out_dim: 5,
            },
        ];
        let mut r = rng::stream(3, rng::INIT);
        for spec in specs {
            let params = LayerParams::he_init(&spec, &mut r);
            let input =
                FeatureMap::new((0..18).map(|i| (i as f64 * 0.7).sin()).collect(), 9, 2).unwrap();
            let (out, cache) = layer_forward(&spec, &params, &input).unwrap();
            let up = FeatureMap::zeros(out.len(), out.channels());
            let (dx, dp) = layer_backward(&spec, &params, &cache, &up).unwrap();
            assert!(dx.data().iter().all(|&v| v == 0.0), "{spec:?}");
            assert!(dp.iter().all(|&v| v == 0.0), "{spec:?}");
        }
    }

    #[test]
    fn he_init_has_expected_variance() {
        let spec = LayerSpec::Dense {
            in_dim: 200,
            out_dim: 100,
        };
        let p = LayerParams::he_init(&spec, &mut rng::stream(9, rng::INIT));
        let n = p.weights.len() as f64;
        let mean = p.weights.iter().sum::<f64>() / n;
        let var = p.weights.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.01);
        assert!((var - 0.01).abs() < 0.001, "var {var}");
        assert!(p.biases.iter().all(|&b| b == 0.0));
    }
}
