//! Composite layers: plain stacks, squeeze-excitation gates, inception
//! blocks and inverted-bottleneck (MBConv) blocks.

use rand_chacha::ChaCha8Rng;

use super::{
    Conv2d, Dense, DepthwiseConv2d, GlobalAvgPool, Layer, LayerKind, MaxPool3x3, Mode, NnError,
    Param, Relu, Tensor,
};

#[derive(Debug, Default)]
pub struct Sequential {
    layers: Vec<Box<dyn Layer>>,
}

impl Sequential {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, layer: impl Layer + 'static) -> &mut Self {
        self.layers.push(Box::new(layer));
        self
    }

    pub fn with(mut self, layer: impl Layer + 'static) -> Self {
        self.push(layer);
        self
    }

    pub fn layers(&self) -> &[Box<dyn Layer>] {
        &self.layers
    }
}

impl Layer for Sequential {
    fn kind(&self) -> LayerKind {
        LayerKind::Sequential
    }

    fn infer(&self, input: &Tensor) -> Result<Tensor, NnError> {
        let mut x = input.clone();
        for layer in &self.layers {
            x = layer.infer(&x)?;
        }
        Ok(x)
    }

    fn forward(&mut self, input: &Tensor, mut mode: Mode<'_>) -> Result<Tensor, NnError> {
        let mut x = input.clone();
        for layer in &mut self.layers {
            x = layer.forward(&x, mode.reborrow())?;
        }
        Ok(x)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor, NnError> {
        let mut g = grad_out.clone();
        for layer in self.layers.iter_mut().rev() {
            g = layer.backward(&g)?;
        }
        Ok(g)
    }

    fn visit_params(&self, f: &mut dyn FnMut(&Param)) {
        for layer in &self.layers {
            layer.visit_params(f);
        }
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param)) {
        for layer in &mut self.layers {
            layer.visit_params_mut(f);
        }
    }
}

/// Channel attention: `y = x * sigmoid(fc2(relu(fc1(gap(x)))))`, the gate
/// broadcast over each channel plane.
#[derive(Debug)]
pub struct SqueezeExcite {
    squeeze: Sequential,
    cache: Option<(Tensor, Tensor)>,
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

impl SqueezeExcite {
    pub fn new(name: &str, channels: usize, reduction: usize, rng: &mut ChaCha8Rng) -> Self {
        let hidden = (channels / reduction).max(1);
        let squeeze = Sequential::new()
            .with(GlobalAvgPool::new())
            .with(Dense::new(&format!("{name}.reduce"), channels, hidden, rng))
            .with(Relu::new())
            .with(Dense::new(&format!("{name}.expand"), hidden, channels, rng));
        Self {
            squeeze,
            cache: None,
        }
    }

    fn apply_gate(input: &Tensor, gate: &Tensor) -> Tensor {
        let area = input.shape()[2] * input.shape()[3];
        let mut out = input.clone();
        for (plane, &g) in out.data_mut().chunks_exact_mut(area).zip(gate.data()) {
            plane.iter_mut().for_each(|v| *v *= g);
        }
        out
    }
}

impl Layer for SqueezeExcite {
    fn kind(&self) -> LayerKind {
        LayerKind::SigmoidGate
    }

    fn infer(&self, input: &Tensor) -> Result<Tensor, NnError> {
        input.expect_rank(4, "squeeze-excite input")?;
        let gate = self.squeeze.infer(input)?.map(sigmoid);
        Ok(Self::apply_gate(input, &gate))
    }

    fn forward(&mut self, input: &Tensor, mode: Mode<'_>) -> Result<Tensor, NnError> {
        input.expect_rank(4, "squeeze-excite input")?;
        let gate = self.squeeze.forward(input, mode)?.map(sigmoid);
        let out = Self::apply_gate(input, &gate);
        self.cache = Some((input.clone(), gate));
        Ok(out)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor, NnError> {
        let (input, gate) = self.cache.as_ref().ok_or(NnError::NoCachedForward)?;
        grad_out.expect_shape(input.shape(), "squeeze-excite grad_out")?;
        let area = input.shape()[2] * input.shape()[3];
        let mut grad_in = Self::apply_gate(grad_out, gate);
        let grad_logits: Vec<f64> = grad_out
            .data()
            .chunks_exact(area)
            .zip(input.data().chunks_exact(area))
            .zip(gate.data())
            .map(|((g, x), &s)| {
                let dgate: f64 = g.iter().zip(x).map(|(a, b)| a * b).sum();
                dgate * s * (1.0 - s)
            })
            .collect();
        let grad_logits = Tensor::new(gate.shape().to_vec(), grad_logits)?;
        let through_squeeze = self.squeeze.backward(&grad_logits)?;
        grad_in.add_assign(&through_squeeze)?;
        Ok(grad_in)
    }

    fn visit_params(&self, f: &mut dyn FnMut(&Param)) {
        self.squeeze.visit_params(f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param)) {
        self.squeeze.visit_params_mut(f);
    }
}

/// Parallel 1×1, 3×3, 5×5 and pool→1×1 branches, concatenated along
/// channels. Spatial dims are preserved.
#[derive(Debug)]
pub struct Inception {
    branches: Vec<Sequential>,
    split: Option<Vec<usize>>,
}

impl Inception {
    pub fn new(name: &str, in_channels: usize, per_branch: usize, rng: &mut ChaCha8Rng) -> Self {
        let conv = |suffix: &str, k: usize, rng: &mut ChaCha8Rng| {
            Conv2d::new(&format!("{name}.{suffix}"), in_channels, per_branch, k, 1, k / 2, rng)
        };
        let branches = vec![
            Sequential::new().with(conv("b1x1", 1, rng)).with(Relu::new()),
            Sequential::new().with(conv("b3x3", 3, rng)).with(Relu::new()),
            Sequential::new().with(conv("b5x5", 5, rng)).with(Relu::new()),
            Sequential::new()
                .with(MaxPool3x3::new())
                .with(conv("bpool", 1, rng))
                .with(Relu::new()),
        ];
        Self {
            branches,
            split: None,
        }
    }

    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    fn concat(parts: &[Tensor]) -> Result<Tensor, NnError> {
        let s = parts[0].shape();
        let (batch, h, w) = (s[0], s[2], s[3]);
        let channels: usize = parts.iter().map(|p| p.shape()[1]).sum();
        let mut out = Tensor::zeros(&[batch, channels, h, w]);
        for b in 0..batch {
            let dst = out.outer_mut(b);
            let mut offset = 0;
            for p in parts {
                let src = p.outer(b);
                dst[offset..offset + src.len()].copy_from_slice(src);
                offset += src.len();
            }
        }
        Ok(out)
    }
}

impl Layer for Inception {
    fn kind(&self) -> LayerKind {
        LayerKind::Inception
    }

    fn infer(&self, input: &Tensor) -> Result<Tensor, NnError> {
        let parts = self
            .branches
            .iter()
            .map(|b| b.infer(input))
            .collect::<Result<Vec<_>, _>>()?;
        Self::concat(&parts)
    }

    fn forward(&mut self, input: &Tensor, mut mode: Mode<'_>) -> Result<Tensor, NnError> {
        let parts = self
            .branches
            .iter_mut()
            .map(|b| b.forward(input, mode.reborrow()))
            .collect::<Result<Vec<_>, _>>()?;
        self.split = Some(parts.iter().map(|p| p.shape()[1]).collect());
        Self::concat(&parts)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor, NnError> {
        let split = self.split.clone().ok_or(NnError::NoCachedForward)?;
        grad_out.expect_rank(4, "inception grad_out")?;
        let s = grad_out.shape();
        let (batch, area) = (s[0], s[2] * s[3]);
        if split.iter().sum::<usize>() != s[1] {
            return Err(NnError::ShapeMismatch("inception grad_out channels".into()));
        }
        let mut grad_in: Option<Tensor> = None;
        let mut offset = 0;
        for (branch, &channels) in self.branches.iter_mut().zip(&split) {
            let mut part = Tensor::zeros(&[batch, channels, s[2], s[3]]);
            for b in 0..batch {
                let src = &grad_out.outer(b)[offset * area..(offset + channels) * area];
                part.outer_mut(b).copy_from_slice(src);
            }
            offset += channels;
            let g = branch.backward(&part)?;
            match grad_in.as_mut() {
                None => grad_in = Some(g),
                Some(acc) => acc.add_assign(&g)?,
            }
        }
        grad_in.ok_or(NnError::NoCachedForward)
    }

    fn visit_params(&self, f: &mut dyn FnMut(&Param)) {
        for b in &self.branches {
            b.visit_params(f);
        }
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param)) {
        for b in &mut self.branches {
            b.visit_params_mut(f);
        }
    }
}

/// Inverted bottleneck: 1×1 expand, depthwise 3×3, squeeze-excitation,
/// 1×1 project, plus an identity shortcut when input and output shapes
/// agree.
#[derive(Debug)]
pub struct MbConv {
    body: Sequential,
    residual: bool,
}

impl MbConv {
    pub fn new(
        name: &str,
        in_channels: usize,
        out_channels: usize,
        expansion: usize,
        stride: usize,
        se_reduction: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let wide = in_channels * expansion;
        let body = Sequential::new()
            .with(Conv2d::new(&format!("{name}.expand"), in_channels, wide, 1, 1, 0, rng))
            .with(Relu::new())
            .with(DepthwiseConv2d::new(&format!("{name}.depthwise"), wide, 3, stride, 1, rng))
            .with(Relu::new())
            .with(SqueezeExcite::new(&format!("{name}.se"), wide, se_reduction, rng))
            .with(Conv2d::new(&format!("{name}.project"), wide, out_channels, 1, 1, 0, rng));
        Self {
            body,
            residual: in_channels == out_channels && stride == 1,
        }
    }

    pub fn has_residual(&self) -> bool {
        self.residual
    }
}

impl Layer for MbConv {
    fn kind(&self) -> LayerKind {
        LayerKind::MbConv
    }

    fn infer(&self, input: &Tensor) -> Result<Tensor, NnError> {
        let mut out = self.body.infer(input)?;
        if self.residual {
            out.add_assign(input)?;
        }
        Ok(out)
    }

    fn forward(&mut self, input: &Tensor, mode: Mode<'_>) -> Result<Tensor, NnError> {
        let mut out = self.body.forward(input, mode)?;
        if self.residual {
            out.add_assign(input)?;
        }
        Ok(out)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor, NnError> {
        let mut g = self.body.backward(grad_out)?;
        if self.residual {
            g.add_assign(grad_out)?;
        }
        Ok(g)
    }

    fn visit_params(&self, f: &mut dyn FnMut(&Param)) {
        self.body.visit_params(f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param)) {
        self.body.visit_params_mut(f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn inception_output_channels_are_branch_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let block = Inception::new("inc", 16, 8, &mut rng);
        let y = block.infer(&Tensor::filled(&[2, 16, 8, 8], 0.1)).unwrap();
        assert_eq!(y.shape(), &[2, 32, 8, 8]);
    }

    #[test]
    fn mbconv_residual_only_when_shapes_match() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let same = MbConv::new("a", 16, 16, 4, 1, 4, &mut rng);
        let down = MbConv::new("b", 16, 32, 4, 2, 4, &mut rng);
        let strided = MbConv::new("c", 16, 16, 4, 2, 4, &mut rng);
        assert!(same.has_residual());
        assert!(!down.has_residual());
        assert!(!strided.has_residual());
        let x = Tensor::filled(&[1, 16, 8, 8], 0.2);
        assert_eq!(same.infer(&x).unwrap().shape(), x.shape());
        assert_eq!(down.infer(&x).unwrap().shape(), &[1, 32, 4, 4]);
    }

    #[test]
    fn gate_is_bounded_by_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let se = SqueezeExcite::new("se", 8, 4, &mut rng);
        let x = Tensor::filled(&[1, 8, 3, 3], 2.0);
        let y = se.infer(&x).unwrap();
        assert!(y.data().iter().all(|&v| v > 0.0 && v < 2.0));
    }
}
