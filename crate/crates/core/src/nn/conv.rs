use rand_chacha::ChaCha8Rng;

use super::gemm::gemm;
use super::{he_uniform, Layer, LayerKind, Mode, NnError, Param, Tensor};

fn out_extent(size: usize, k: usize, stride: usize, pad: usize, strict: bool) -> Result<usize, NnError> {
    let padded = size + 2 * pad;
    if stride == 0 || padded < k || (strict && !(padded - k).is_multiple_of(stride)) {
        return Err(NnError::ShapeMismatch(format!(
            "extent {size} with kernel {k}, stride {stride}, padding {pad} is not integral"
        )));
    }
    Ok((padded - k) / stride + 1)
}

#[derive(Debug, Clone, Copy)]
struct Geometry {
    channels: usize,
    height: usize,
    width: usize,
    k: usize,
    stride: usize,
    pad: usize,
    out_h: usize,
    out_w: usize,
}

impl Geometry {
    fn new(
        channels: usize,
        height: usize,
        width: usize,
        k: usize,
        stride: usize,
        pad: usize,
    ) -> Result<Self, NnError> {
        Self::with_rule(channels, height, width, k, stride, pad, true)
    }

    /// Non-strict geometry floors the output extent, dropping a trailing
    /// partial window.
    fn with_rule(
        channels: usize,
        height: usize,
        width: usize,
        k: usize,
        stride: usize,
        pad: usize,
        strict: bool,
    ) -> Result<Self, NnError> {
        Ok(Self {
            channels,
            height,
            width,
            k,
            stride,
            pad,
            out_h: out_extent(height, k, stride, pad, strict)?,
            out_w: out_extent(width, k, stride, pad, strict)?,
        })
    }

    fn patch_len(&self) -> usize {
        self.channels * self.k * self.k
    }

    fn positions(&self) -> usize {
        self.out_h * self.out_w
    }

    /// Source pixel for output position `(oy, ox)` and kernel tap `(ky, kx)`.
    #[inline]
    fn source(&self, oy: usize, ox: usize, ky: usize, kx: usize) -> Option<(usize, usize)> {
        let y = (oy * self.stride + ky) as isize - self.pad as isize;
        let x = (ox * self.stride + kx) as isize - self.pad as isize;
        if y < 0 || x < 0 || y >= self.height as isize || x >= self.width as isize {
            None
        } else {
            Some((y as usize, x as usize))
        }
    }
}

/// Unfolds `[C,H,W]` into `[C*k*k, out_h*out_w]` columns.
fn im2col(input: &[f64], g: &Geometry, cols: &mut [f64]) {
    let positions = g.positions();
    for c in 0..g.channels {
        let plane = &input[c * g.height * g.width..(c + 1) * g.height * g.width];
        for ky in 0..g.k {
            for kx in 0..g.k {
                let row = (c * g.k + ky) * g.k + kx;
                let dst = &mut cols[row * positions..(row + 1) * positions];
                for oy in 0..g.out_h {
                    for ox in 0..g.out_w {
                        dst[oy * g.out_w + ox] = match g.source(oy, ox, ky, kx) {
                            Some((y, x)) => plane[y * g.width + x],
                            None => 0.0,
                        };
                    }
                }
            }
        }
    }
}

/// Scatter-adds columns back onto a `[C,H,W]` gradient buffer.
fn col2im(cols: &[f64], g: &Geometry, out: &mut [f64]) {
    let positions = g.positions();
    for c in 0..g.channels {
        let plane = &mut out[c * g.height * g.width..(c + 1) * g.height * g.width];
        for ky in 0..g.k {
            for kx in 0..g.k {
                let row = (c * g.k + ky) * g.k + kx;
                let src = &cols[row * positions..(row + 1) * positions];
                for oy in 0..g.out_h {
                    for ox in 0..g.out_w {
                        if let Some((y, x)) = g.source(oy, ox, ky, kx) {
                            plane[y * g.width + x] += src[oy * g.out_w + ox];
                        }
                    }
                }
            }
        }
    }
}

fn check_weights(weights: &Tensor, bias: &Tensor, in_channels: usize) -> Result<(usize, usize), NnError> {
    weights.expect_rank(4, "conv2d weights")?;
    let s = weights.shape();
    if s[1] != in_channels || s[2] != s[3] {
        return Err(NnError::ShapeMismatch(format!(
            "conv2d weights {s:?} do not fit {in_channels} input channels with a square kernel"
        )));
    }
    bias.expect_shape(&[s[0]], "conv2d bias")?;
    Ok((s[0], s[2]))
}

/// Single-example convolution (cross-correlation) of `[C_in,H,W]` with
/// `[C_out,C_in,k,k]` weights plus a per-channel bias.
pub fn conv2d(
    input: &Tensor,
    weights: &Tensor,
    bias: &Tensor,
    stride: usize,
    padding: usize,
) -> Result<Tensor, NnError> {
    input.expect_rank(3, "conv2d input")?;
    let [c, h, w] = [input.shape()[0], input.shape()[1], input.shape()[2]];
    let (c_out, k) = check_weights(weights, bias, c)?;
    let g = Geometry::new(c, h, w, k, stride, padding)?;
    let mut out = vec![0.0; c_out * g.positions()];
    conv_forward_into(input.data(), weights.data(), bias.data(), &g, c_out, &mut out);
    Tensor::new(vec![c_out, g.out_h, g.out_w], out)
}

fn conv_forward_into(input: &[f64], weights: &[f64], bias: &[f64], g: &Geometry, c_out: usize, out: &mut [f64]) {
    let positions = g.positions();
    let mut cols = vec![0.0; g.patch_len() * positions];
    im2col(input, g, &mut cols);
    for (co, row) in out.chunks_exact_mut(positions).enumerate() {
        row.fill(bias[co]);
    }
    gemm(c_out, g.patch_len(), positions, 1.0, weights, false, &cols, false, 1.0, out);
}

#[derive(Debug, Clone)]
pub struct Conv2dGrads {
    pub input: Tensor,
    pub weights: Tensor,
    pub bias: Tensor,
}

/// Exact gradients of [`conv2d`] given the upstream gradient.
pub fn conv2d_backward(
    input: &Tensor,
    weights: &Tensor,
    stride: usize,
    padding: usize,
    grad_out: &Tensor,
) -> Result<Conv2dGrads, NnError> {
    input.expect_rank(3, "conv2d input")?;
    let [c, h, w] = [input.shape()[0], input.shape()[1], input.shape()[2]];
    let bias = Tensor::zeros(&[weights.shape().first().copied().unwrap_or(0)]);
    let (c_out, k) = check_weights(weights, &bias, c)?;
    let g = Geometry::new(c, h, w, k, stride, padding)?;
    grad_out.expect_shape(&[c_out, g.out_h, g.out_w], "conv2d grad_out")?;
    let mut gi = vec![0.0; input.len()];
    let mut gw = vec![0.0; weights.len()];
    let mut gb = vec![0.0; c_out];
    conv_backward_into(input.data(), weights.data(), grad_out.data(), &g, c_out, &mut gi, &mut gw, &mut gb);
    Ok(Conv2dGrads {
        input: Tensor::new(input.shape().to_vec(), gi)?,
        weights: Tensor::new(weights.shape().to_vec(), gw)?,
        bias: Tensor::new(vec![c_out], gb)?,
    })
}

#[allow(clippy::too_many_arguments)]
fn conv_backward_into(
    input: &[f64],
    weights: &[f64],
    grad_out: &[f64],
    g: &Geometry,
    c_out: usize,
    grad_in: &mut [f64],
    grad_w: &mut [f64],
    grad_b: &mut [f64],
) {
    let positions = g.positions();
    let patch = g.patch_len();
    let mut cols = vec![0.0; patch * positions];
    im2col(input, g, &mut cols);
    for (co, row) in grad_out.chunks_exact(positions).enumerate() {
        grad_b[co] += row.iter().sum::<f64>();
    }
    gemm(c_out, positions, patch, 1.0, grad_out, false, &cols, true, 1.0, grad_w);
    gemm(patch, c_out, positions, 1.0, weights, true, grad_out, false, 0.0, &mut cols);
    col2im(&cols, g, grad_in);
}

/// Batched 2-D convolution layer over `[B,C_in,H,W]`.
#[derive(Debug)]
pub struct Conv2d {
    pub weight: Param,
    pub bias: Param,
    stride: usize,
    padding: usize,
    floor_extent: bool,
    cache: Option<Tensor>,
}

impl Conv2d {
    /// He-uniform initialised layer named `<name>.weight` / `<name>.bias`.
    pub fn new(
        name: &str,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let fan_in = in_channels * kernel * kernel;
        let weight = he_uniform(&[out_channels, in_channels, kernel, kernel], fan_in, rng);
        Self {
            weight: Param::new(format!("{name}.weight"), weight),
            bias: Param::new(format!("{name}.bias"), Tensor::zeros(&[out_channels])),
            stride,
            padding,
            floor_extent: false,
            cache: None,
        }
    }

    /// Floors non-integral output extents instead of rejecting them.
    pub fn with_floor_extent(mut self) -> Self {
        self.floor_extent = true;
        self
    }

    pub fn out_channels(&self) -> usize {
        self.weight.value.shape()[0]
    }

    fn geometry(&self, input: &Tensor) -> Result<(usize, Geometry), NnError> {
        input.expect_rank(4, "conv2d input")?;
        let s = input.shape();
        let (_, k) = check_weights(&self.weight.value, &self.bias.value, s[1])?;
        let g = Geometry::with_rule(s[1], s[2], s[3], k, self.stride, self.padding, !self.floor_extent)?;
        Ok((s[0], g))
    }
}

impl Layer for Conv2d {
    fn kind(&self) -> LayerKind {
        LayerKind::Conv2d
    }

    fn infer(&self, input: &Tensor) -> Result<Tensor, NnError> {
        let (batch, g) = self.geometry(input)?;
        let c_out = self.out_channels();
        let mut out = Tensor::zeros(&[batch, c_out, g.out_h, g.out_w]);
        for b in 0..batch {
            conv_forward_into(
                input.outer(b),
                self.weight.value.data(),
                self.bias.value.data(),
                &g,
                c_out,
                out.outer_mut(b),
            );
        }
        Ok(out)
    }

    fn forward(&mut self, input: &Tensor, _mode: Mode<'_>) -> Result<Tensor, NnError> {
        let out = self.infer(input)?;
        self.cache = Some(input.clone());
        Ok(out)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor, NnError> {
        let input = self.cache.as_ref().ok_or(NnError::NoCachedForward)?;
        let (batch, g) = self.geometry(input)?;
        let c_out = self.out_channels();
        grad_out.expect_shape(&[batch, c_out, g.out_h, g.out_w], "conv2d grad_out")?;
        let mut grad_in = Tensor::zeros(input.shape());
        for b in 0..batch {
            conv_backward_into(
                input.outer(b),
                self.weight.value.data(),
                grad_out.outer(b),
                &g,
                c_out,
                grad_in.outer_mut(b),
                self.weight.grad.data_mut(),
                self.bias.grad.data_mut(),
            );
        }
        Ok(grad_in)
    }

    fn visit_params(&self, f: &mut dyn FnMut(&Param)) {
        f(&self.weight);
        f(&self.bias);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param)) {
        f(&mut self.weight);
        f(&mut self.bias);
    }
}

/// Per-channel (depthwise) convolution: weights `[C,1,k,k]`, bias `[C]`.
/// Output extents are floored, so stride 2 halves even inputs.
#[derive(Debug)]
pub struct DepthwiseConv2d {
    pub weight: Param,
    pub bias: Param,
    stride: usize,
    padding: usize,
    cache: Option<Tensor>,
}

impl DepthwiseConv2d {
    pub fn new(name: &str, channels: usize, kernel: usize, stride: usize, padding: usize, rng: &mut ChaCha8Rng) -> Self {
        let weight = he_uniform(&[channels, 1, kernel, kernel], kernel * kernel, rng);
        Self {
            weight: Param::new(format!("{name}.weight"), weight),
            bias: Param::new(format!("{name}.bias"), Tensor::zeros(&[channels])),
            stride,
            padding,
            cache: None,
        }
    }

    fn geometry(&self, input: &Tensor) -> Result<(usize, Geometry), NnError> {
        input.expect_rank(4, "depthwise input")?;
        let s = input.shape();
        let ws = self.weight.value.shape();
        if ws[0] != s[1] {
            return Err(NnError::ShapeMismatch(format!(
                "depthwise weights {ws:?} vs input channels {}",
                s[1]
            )));
        }
        Ok((s[0], Geometry::with_rule(s[1], s[2], s[3], ws[2], self.stride, self.padding, false)?))
    }
}

impl Layer for DepthwiseConv2d {
    fn kind(&self) -> LayerKind {
        LayerKind::DepthwiseConv2d
    }

    fn infer(&self, input: &Tensor) -> Result<Tensor, NnError> {
        let (batch, g) = self.geometry(input)?;
        let mut out = Tensor::zeros(&[batch, g.channels, g.out_h, g.out_w]);
        let w = self.weight.value.data();
        let bias = self.bias.value.data();
        let kk = g.k * g.k;
        for b in 0..batch {
            let src = input.outer(b);
            let dst = out.outer_mut(b);
            for c in 0..g.channels {
                let plane = &src[c * g.height * g.width..(c + 1) * g.height * g.width];
                let taps = &w[c * kk..(c + 1) * kk];
                for oy in 0..g.out_h {
                    for ox in 0..g.out_w {
                        let mut acc = bias[c];
                        for ky in 0..g.k {
                            for kx in 0..g.k {
                                if let Some((y, x)) = g.source(oy, ox, ky, kx) {
                                    acc += taps[ky * g.k + kx] * plane[y * g.width + x];
                                }
                            }
                        }
                        dst[(c * g.out_h + oy) * g.out_w + ox] = acc;
                    }
                }
            }
        }
        Ok(out)
    }

    fn forward(&mut self, input: &Tensor, _mode: Mode<'_>) -> Result<Tensor, NnError> {
        let out = self.infer(input)?;
        self.cache = Some(input.clone());
        Ok(out)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor, NnError> {
        let input = self.cache.as_ref().ok_or(NnError::NoCachedForward)?;
        let (batch, g) = self.geometry(input)?;
        grad_out.expect_shape(&[batch, g.channels, g.out_h, g.out_w], "depthwise grad_out")?;
        let mut grad_in = Tensor::zeros(input.shape());
        let kk = g.k * g.k;
        let w = self.weight.value.data();
        let gw = self.weight.grad.data_mut();
        let gb = self.bias.grad.data_mut();
        for b in 0..batch {
            let src = input.outer(b);
            let go = grad_out.outer(b);
            let gi = grad_in.outer_mut(b);
            for c in 0..g.channels {
                let off = c * g.height * g.width;
                for oy in 0..g.out_h {
                    for ox in 0..g.out_w {
                        let d = go[(c * g.out_h + oy) * g.out_w + ox];
                        gb[c] += d;
                        for ky in 0..g.k {
                            for kx in 0..g.k {
                                if let Some((y, x)) = g.source(oy, ox, ky, kx) {
                                    let t = c * kk + ky * g.k + kx;
                                    gw[t] += d * src[off + y * g.width + x];
                                    gi[off + y * g.width + x] += d * w[t];
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(grad_in)
    }

    fn visit_params(&self, f: &mut dyn FnMut(&Param)) {
        f(&self.weight);
        f(&self.bias);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param)) {
        f(&mut self.weight);
        f(&mut self.bias);
    }
}
