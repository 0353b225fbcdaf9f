use super::kernels::{axpy, dot, Real};
use super::spec::{Layer, Layout, ModelSpec};
use super::weights::ModelWeights;
use super::{Batch, Matrix};
use crate::error::{Error, Result};

/// Activations recorded by a forward pass, consumed by [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    rows: usize,
    fingerprint: u64,
    /// `inputs[i]` is the batch input of layer `i`.
    pub(crate) inputs: Vec<Vec<T>>,
}

impl<T> ForwardCache<T> {
    pub fn rows(&self) -> usize {
        self.rows
    }
}

fn fingerprint<T: Real>(params: &[T]) -> u64 {
    params.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, p| {
        (h ^ p.into_f64().to_bits()).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

fn check_inputs(spec: &ModelSpec, cols: usize) -> Result<()> {
    if cols != spec.input_len() {
        return Err(Error::Shape(format!(
            "input has {cols} features, model expects {:?} ({})",
            spec.input_shape,
            spec.input_len()
        )));
    }
    Ok(())
}

fn check_params(layout: &Layout, len: usize) -> Result<()> {
    if len != layout.total_params {
        return Err(Error::Shape(format!(
            "weights have {len} params, model expects {}",
            layout.total_params
        )));
    }
    Ok(())
}

/// Forward pass with cached activations for backpropagation.
pub fn forward(
    spec: &ModelSpec,
    weights: &ModelWeights,
    batch: &Batch,
) -> Result<(Matrix<f32>, ForwardCache<f32>)> {
    forward_generic(spec, &weights.params, &batch.inputs, true)
}

/// Logits only; nothing is retained for a backward pass.
pub fn forward_logits(
    spec: &ModelSpec,
    weights: &ModelWeights,
    inputs: &Matrix<f32>,
) -> Result<Matrix<f32>> {
    forward_generic(spec, &weights.params, inputs, false).map(|(logits, _)| logits)
}

pub(crate) fn forward_generic<T: Real>(
    spec: &ModelSpec,
    params: &[T],
    inputs: &Matrix<T>,
    keep_cache: bool,
) -> Result<(Matrix<T>, ForwardCache<T>)> {
    let layout = spec.layout()?;
    check_params(&layout, params.len())?;
    check_inputs(spec, inputs.cols)?;
    let rows = inputs.rows;
    let mut cache = ForwardCache {
        rows,
        fingerprint: if keep_cache { fingerprint(params) } else { 0 },
        inputs: Vec::with_capacity(if keep_cache { spec.layers.len() } else { 0 }),
    };
    let mut current = inputs.data.clone();
    for (i, layer) in spec.layers.iter().enumerate() {
        let next = layer_forward(layer, &layout, i, params, &current, rows);
        if keep_cache {
            cache.inputs.push(std::mem::replace(&mut current, next));
        } else {
            current = next;
        }
    }
    Ok((Matrix::new(rows, spec.num_classes, current)?, cache))
}

fn layer_forward<T: Real>(
    layer: &Layer,
    layout: &Layout,
    i: usize,
    params: &[T],
    input: &[T],
    rows: usize,
) -> Vec<T> {
    let in_len = layout.numel(i);
    let out_len = layout.numel(i + 1);
    match *layer {
        Layer::Dense { in_dim, out_dim } => {
            let off = layout.offsets[i].unwrap();
            let w = &params[off..off + in_dim * out_dim];
            let bias = &params[off + in_dim * out_dim..off + in_dim * out_dim + out_dim];
            let mut out = vec![T::zero(); rows * out_dim];
            for (x, y) in input.chunks_exact(in_dim).zip(out.chunks_exact_mut(out_dim)) {
                y.copy_from_slice(bias);
                for (xi, wi) in x.iter().zip(w.chunks_exact(out_dim)) {
                    if *xi != T::zero() {
                        axpy(y, *xi, wi);
                    }
                }
            }
            out
        }
        Layer::Conv2d {
            out_channels,
            kernel_size,
            stride,
            ..
        } => {
            let off = layout.offsets[i].unwrap();
            let geo = ConvGeometry::new(&layout.shapes[i], kernel_size, stride);
            let q_len = geo.patch_len();
            let p_len = geo.positions();
            let w = &params[off..off + out_channels * q_len];
            let bias = &params[off + out_channels * q_len..off + out_channels * q_len + out_channels];
            let mut cols = vec![T::zero(); q_len * p_len];
            let mut out = vec![T::zero(); rows * out_len];
            for (x, y) in input.chunks_exact(in_len).zip(out.chunks_exact_mut(out_len)) {
                geo.im2col(x, &mut cols);
                for (o, y_o) in y.chunks_exact_mut(p_len).enumerate() {
                    y_o.fill(bias[o]);
                    for (wq, col) in w[o * q_len..(o + 1) * q_len].iter().zip(cols.chunks_exact(p_len)) {
                        axpy(y_o, *wq, col);
                    }
                }
            }
            out
        }
        Layer::Relu => input
            .iter()
            .map(|&v| if v > T::zero() { v } else { T::zero() })
            .collect(),
        Layer::Flatten => input.to_vec(),
    }
}

/// Gradient of the loss with respect to every parameter, given the gradient
/// with respect to the logits. Frozen layers get gradients too; masking is
/// the optimizer's job.
pub fn backward(
    spec: &ModelSpec,
    weights: &ModelWeights,
    cache: &ForwardCache<f32>,
    grad_logits: &Matrix<f32>,
) -> Result<Vec<f32>> {
    backward_generic(spec, &weights.params, cache, grad_logits)
}

pub(crate) fn backward_generic<T: Real>(
    spec: &ModelSpec,
    params: &[T],
    cache: &ForwardCache<T>,
    grad_logits: &Matrix<T>,
) -> Result<Vec<T>> {
    let layout = spec.layout()?;
    check_params(&layout, params.len())?;
    let rows = cache.rows;
    let consistent = cache.inputs.len() == spec.layers.len()
        && cache
            .inputs
            .iter()
            .enumerate()
            .all(|(i, a)| a.len() == rows * layout.numel(i));
    if !consistent {
        return Err(Error::Contract("forward cache does not belong to this model".into()));
    }
    if cache.fingerprint != fingerprint(params) {
        return Err(Error::Contract(
            "forward cache is stale: weights changed since the forward pass".into(),
        ));
    }
    if grad_logits.rows != rows || grad_logits.cols != spec.num_classes {
        return Err(Error::Contract(format!(
            "logit gradient is {}x{}, forward pass produced {rows}x{}",
            grad_logits.rows, grad_logits.cols, spec.num_classes
        )));
    }

    let mut grad = vec![T::zero(); params.len()];
    let mut g = grad_logits.data.clone();
    for (i, layer) in spec.layers.iter().enumerate().rev() {
        let input = &cache.inputs[i];
        let need_input_grad = i > 0;
        g = layer_backward(layer, &layout, i, params, input, &g, rows, &mut grad, need_input_grad);
    }
    Ok(grad)
}

#[allow(clippy::too_many_arguments)]
fn layer_backward<T: Real>(
    layer: &Layer,
    layout: &Layout,
    i: usize,
    params: &[T],
    input: &[T],
    g_out: &[T],
    rows: usize,
    grad: &mut [T],
    need_input_grad: bool,
) -> Vec<T> {
    let in_len = layout.numel(i);
    let out_len = layout.numel(i + 1);
    match *layer {
        Layer::Dense { in_dim, out_dim } => {
            let off = layout.offsets[i].unwrap();
            let n_w = in_dim * out_dim;
            let w = &params[off..off + n_w];
            let (gw, gb) = grad[off..off + n_w + out_dim].split_at_mut(n_w);
            let mut g_in = if need_input_grad { vec![T::zero(); rows * in_dim] } else { Vec::new() };
            for r in 0..rows {
                let x = &input[r * in_dim..(r + 1) * in_dim];
                let g = &g_out[r * out_dim..(r + 1) * out_dim];
                for (b, &gv) in gb.iter_mut().zip(g) {
                    *b += gv;
                }
                for (xi, gwi) in x.iter().zip(gw.chunks_exact_mut(out_dim)) {
                    if *xi != T::zero() {
                        axpy(gwi, *xi, g);
                    }
                }
                if need_input_grad {
                    let gx = &mut g_in[r * in_dim..(r + 1) * in_dim];
                    for (gxi, wi) in gx.iter_mut().zip(w.chunks_exact(out_dim)) {
                        *gxi = dot(wi, g);
                    }
                }
            }
            g_in
        }
        Layer::Conv2d {
            out_channels,
            kernel_size,
            stride,
            ..
        } => {
            let off = layout.offsets[i].unwrap();
            let geo = ConvGeometry::new(&layout.shapes[i], kernel_size, stride);
            let q_len = geo.patch_len();
            let p_len = geo.positions();
            let n_w = out_channels * q_len;
            let w = &params[off..off + n_w];
            let (gw, gb) = grad[off..off + n_w + out_channels].split_at_mut(n_w);
            let mut cols = vec![T::zero(); q_len * p_len];
            let mut gcols = vec![T::zero(); if need_input_grad { q_len * p_len } else { 0 }];
            let mut g_in = if need_input_grad { vec![T::zero(); rows * in_len] } else { Vec::new() };
            for r in 0..rows {
                let x = &input[r * in_len..(r + 1) * in_len];
                let g = &g_out[r * out_len..(r + 1) * out_len];
                geo.im2col(x, &mut cols);
                if need_input_grad {
                    gcols.fill(T::zero());
                }
                for (o, g_o) in g.chunks_exact(p_len).enumerate() {
                    let mut s = T::zero();
                    for &v in g_o {
                        s += v;
                    }
                    gb[o] += s;
                    let w_o = &w[o * q_len..(o + 1) * q_len];
                    for (q, col) in cols.chunks_exact(p_len).enumerate() {
                        gw[o * q_len + q] += dot(g_o, col);
                        if need_input_grad {
                            axpy(&mut gcols[q * p_len..(q + 1) * p_len], w_o[q], g_o);
                        }
                    }
                }
                if need_input_grad {
                    geo.col2im_add(&gcols, &mut g_in[r * in_len..(r + 1) * in_len]);
                }
            }
            g_in
        }
        Layer::Relu => {
            if !need_input_grad {
                return Vec::new();
            }
            input
                .iter()
                .zip(g_out)
                .map(|(&x, &g)| if x > T::zero() { g } else { T::zero() })
                .collect()
        }
        Layer::Flatten => {
            if need_input_grad {
                g_out.to_vec()
            } else {
                Vec::new()
            }
        }
    }
}

struct ConvGeometry {
    channels: usize,
    height: usize,
    width: usize,
    kernel: usize,
    stride: usize,
    out_h: usize,
    out_w: usize,
}

impl ConvGeometry {
    fn new(shape: &[usize], kernel: usize, stride: usize) -> Self {
        let (channels, height, width) = (shape[0], shape[1], shape[2]);
        ConvGeometry {
            channels,
            height,
            width,
            kernel,
            stride,
            out_h: (height - kernel) / stride + 1,
            out_w: (width - kernel) / stride + 1,
        }
    }

    fn patch_len(&self) -> usize {
        self.channels * self.kernel * self.kernel
    }

    fn positions(&self) -> usize {
        self.out_h * self.out_w
    }

    /// `cols[q * positions + p]` = input pixel under kernel tap `q` at output
    /// position `p`.
    fn im2col<T: Real>(&self, x: &[T], cols: &mut [T]) {
        let p_len = self.positions();
        let mut q = 0;
        for c in 0..self.channels {
            let plane = &x[c * self.height * self.width..(c + 1) * self.height * self.width];
            for ky in 0..self.kernel {
                for kx in 0..self.kernel {
                    let col = &mut cols[q * p_len..(q + 1) * p_len];
                    for oy in 0..self.out_h {
                        let row = &plane[(oy * self.stride + ky) * self.width..];
                        for ox in 0..self.out_w {
                            col[oy * self.out_w + ox] = row[ox * self.stride + kx];
                        }
                    }
                    q += 1;
                }
            }
        }
    }

    fn col2im_add<T: Real>(&self, cols: &[T], gx: &mut [T]) {
        let p_len = self.positions();
        let mut q = 0;
        for c in 0..self.channels {
            let plane = &mut gx[c * self.height * self.width..(c + 1) * self.height * self.width];
            for ky in 0..self.kernel {
                for kx in 0..self.kernel {
                    let col = &cols[q * p_len..(q + 1) * p_len];
                    for oy in 0..self.out_h {
                        let base = (oy * self.stride + ky) * self.width;
                        for ox in 0..self.out_w {
                            plane[base + ox * self.stride + kx] += col[oy * self.out_w + ox];
                        }
                    }
                    q += 1;
                }
            }
        }
    }
}

/// Index of the largest value; ties resolve to the lowest index.
pub fn argmax<T: PartialOrd + Copy>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate().skip(1) {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

const PREDICT_CHUNK: usize = 256;

/// Predicted class per input row.
pub fn predict(spec: &ModelSpec, weights: &ModelWeights, inputs: &Matrix<f32>) -> Result<Vec<usize>> {
    check_inputs(spec, inputs.cols)?;
    let mut out = Vec::with_capacity(inputs.rows);
    for start in (0..inputs.rows).step_by(PREDICT_CHUNK) {
        let end = (start + PREDICT_CHUNK).min(inputs.rows);
        let chunk = Matrix {
            rows: end - start,
            cols: inputs.cols,
            data: inputs.data[start * inputs.cols..end * inputs.cols].to_vec(),
        };
        let logits = forward_logits(spec, weights, &chunk)?;
        out.extend((0..logits.rows).map(|r| argmax(logits.row(r))));
    }
    Ok(out)
}
