use super::{Layer, LayerKind, Mode, NnError, Tensor};

fn dims4(t: &Tensor, what: &str) -> Result<[usize; 4], NnError> {
    t.expect_rank(4, what)?;
    let s = t.shape();
    Ok([s[0], s[1], s[2], s[3]])
}

/// 2×2 max pooling with stride 2. Ties go to the first maximum in
/// row-major window order.
#[derive(Debug, Default)]
pub struct MaxPool2 {
    cache: Option<(Vec<usize>, Vec<usize>)>,
}

impl MaxPool2 {
    pub fn new() -> Self {
        Self::default()
    }

    fn run(input: &Tensor) -> Result<(Tensor, Vec<usize>), NnError> {
        let [b, c, h, w] = dims4(input, "maxpool2 input")?;
        if h % 2 != 0 || w % 2 != 0 {
            return Err(NnError::OddSpatialDim(h, w));
        }
        let (oh, ow) = (h / 2, w / 2);
        let mut out = Tensor::zeros(&[b, c, oh, ow]);
        let mut argmax = vec![0; out.len()];
        let src = input.data();
        let dst = out.data_mut();
        for plane in 0..b * c {
            let base = plane * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = base + 2 * oy * w + 2 * ox;
                    for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                        let idx = base + (2 * oy + dy) * w + 2 * ox + dx;
                        if src[idx] > src[best] {
                            best = idx;
                        }
                    }
                    let o = (plane * oh + oy) * ow + ox;
                    dst[o] = src[best];
                    argmax[o] = best;
                }
            }
        }
        Ok((out, argmax))
    }
}

impl Layer for MaxPool2 {
    fn kind(&self) -> LayerKind {
        LayerKind::MaxPool2
    }

    fn infer(&self, input: &Tensor) -> Result<Tensor, NnError> {
        Ok(Self::run(input)?.0)
    }

    fn forward(&mut self, input: &Tensor, _mode: Mode<'_>) -> Result<Tensor, NnError> {
        let (out, argmax) = Self::run(input)?;
        self.cache = Some((input.shape().to_vec(), argmax));
        Ok(out)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor, NnError> {
        let (shape, argmax) = self.cache.as_ref().ok_or(NnError::NoCachedForward)?;
        if grad_out.len() != argmax.len() {
            return Err(NnError::ShapeMismatch("maxpool2 grad_out".into()));
        }
        let mut grad = Tensor::zeros(shape);
        let g = grad.data_mut();
        for (&src, &d) in argmax.iter().zip(grad_out.data()) {
            g[src] += d;
        }
        Ok(grad)
    }
}

/// 3×3 max pooling with stride 1 and implicit `-inf` padding, so spatial
/// dims are preserved (the pooling branch of an inception block).
#[derive(Debug, Default)]
pub struct MaxPool3x3 {
    cache: Option<(Vec<usize>, Vec<usize>)>,
}

impl MaxPool3x3 {
    pub fn new() -> Self {
        Self::default()
    }

    fn run(input: &Tensor) -> Result<(Tensor, Vec<usize>), NnError> {
        let [b, c, h, w] = dims4(input, "maxpool3x3 input")?;
        let mut out = Tensor::zeros(input.shape());
        let mut argmax = vec![0; out.len()];
        let src = input.data();
        let dst = out.data_mut();
        for plane in 0..b * c {
            let base = plane * h * w;
            for y in 0..h {
                for x in 0..w {
                    let mut best = usize::MAX;
                    for yy in y.saturating_sub(1)..(y + 2).min(h) {
                        for xx in x.saturating_sub(1)..(x + 2).min(w) {
                            let idx = base + yy * w + xx;
                            if best == usize::MAX || src[idx] > src[best] {
                                best = idx;
                            }
                        }
                    }
                    dst[base + y * w + x] = src[best];
                    argmax[base + y * w + x] = best;
                }
            }
        }
        Ok((out, argmax))
    }
}

impl Layer for MaxPool3x3 {
    fn kind(&self) -> LayerKind {
        LayerKind::MaxPool3x3
    }

    fn infer(&self, input: &Tensor) -> Result<Tensor, NnError> {
        Ok(Self::run(input)?.0)
    }

    fn forward(&mut self, input: &Tensor, _mode: Mode<'_>) -> Result<Tensor, NnError> {
        let (out, argmax) = Self::run(input)?;
        self.cache = Some((input.shape().to_vec(), argmax));
        Ok(out)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor, NnError> {
        let (shape, argmax) = self.cache.as_ref().ok_or(NnError::NoCachedForward)?;
        grad_out.expect_shape(shape, "maxpool3x3 grad_out")?;
        let mut grad = Tensor::zeros(shape);
        let g = grad.data_mut();
        for (&src, &d) in argmax.iter().zip(grad_out.data()) {
            g[src] += d;
        }
        Ok(grad)
    }
}

/// Mean over the spatial axes: `[B,C,H,W] -> [B,C]`.
#[derive(Debug, Default)]
pub struct GlobalAvgPool {
    cache: Option<Vec<usize>>,
}

impl GlobalAvgPool {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Layer for GlobalAvgPool {
    fn kind(&self) -> LayerKind {
        LayerKind::GlobalAvgPool
    }

    fn infer(&self, input: &Tensor) -> Result<Tensor, NnError> {
        let [b, c, h, w] = dims4(input, "global_avg_pool input")?;
        let area = (h * w) as f64;
        let data = input
            .data()
            .chunks_exact(h * w)
            .map(|plane| plane.iter().sum::<f64>() / area)
            .collect();
        Tensor::new(vec![b, c], data)
    }

    fn forward(&mut self, input: &Tensor, _mode: Mode<'_>) -> Result<Tensor, NnError> {
        let out = self.infer(input)?;
        self.cache = Some(input.shape().to_vec());
        Ok(out)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor, NnError> {
        let shape = self.cache.as_ref().ok_or(NnError::NoCachedForward)?;
        grad_out.expect_shape(&shape[..2], "global_avg_pool grad_out")?;
        let area = shape[2] * shape[3];
        let mut grad = Tensor::zeros(shape);
        for (plane, &d) in grad.data_mut().chunks_exact_mut(area).zip(grad_out.data()) {
            plane.fill(d / area as f64);
        }
        Ok(grad)
    }
}
