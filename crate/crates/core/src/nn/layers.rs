use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::gemm::gemm;
use super::{he_uniform, Layer, LayerKind, Mode, NnError, Param, Tensor};

#[derive(Debug, Default)]
pub struct Relu {
    mask: Option<Vec<bool>>,
}

impl Relu {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Layer for Relu {
    fn kind(&self) -> LayerKind {
        LayerKind::Relu
    }

    fn infer(&self, input: &Tensor) -> Result<Tensor, NnError> {
        Ok(input.map(|v| v.max(0.0)))
    }

    fn forward(&mut self, input: &Tensor, _mode: Mode<'_>) -> Result<Tensor, NnError> {
        self.mask = Some(input.data().iter().map(|&v| v > 0.0).collect());
        self.infer(input)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor, NnError> {
        let mask = self.mask.as_ref().ok_or(NnError::NoCachedForward)?;
        if mask.len() != grad_out.len() {
            return Err(NnError::ShapeMismatch("relu grad_out".into()));
        }
        let data = grad_out
            .data()
            .iter()
            .zip(mask)
            .map(|(&g, &on)| if on { g } else { 0.0 })
            .collect();
        Tensor::new(grad_out.shape().to_vec(), data)
    }
}

/// Fully connected layer: `[B,in] -> [B,out]`, weights stored `[out,in]`.
#[derive(Debug)]
pub struct Dense {
    pub weight: Param,
    pub bias: Param,
    cache: Option<Tensor>,
}

impl Dense {
    pub fn new(name: &str, inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        Self::from_weights(
            name,
            he_uniform(&[outputs, inputs], inputs, rng),
            Tensor::zeros(&[outputs]),
        )
    }

    /// All-zero weights and bias. Used for classifier heads so an untrained
    /// network outputs uniform probabilities.
    pub fn zeroed(name: &str, inputs: usize, outputs: usize) -> Self {
        Self::from_weights(name, Tensor::zeros(&[outputs, inputs]), Tensor::zeros(&[outputs]))
    }

    pub fn from_weights(name: &str, weight: Tensor, bias: Tensor) -> Self {
        Self {
            weight: Param::new(format!("{name}.weight"), weight),
            bias: Param::new(format!("{name}.bias"), bias),
            cache: None,
        }
    }

    fn dims(&self) -> (usize, usize) {
        let s = self.weight.value.shape();
        (s[1], s[0])
    }
}

impl Layer for Dense {
    fn kind(&self) -> LayerKind {
        LayerKind::Dense
    }

    fn infer(&self, input: &Tensor) -> Result<Tensor, NnError> {
        let (inputs, outputs) = self.dims();
        input.expect_rank(2, "dense input")?;
        let batch = input.shape()[0];
        input.expect_shape(&[batch, inputs], "dense input")?;
        let mut out = Tensor::zeros(&[batch, outputs]);
        for row in out.data_mut().chunks_exact_mut(outputs) {
            row.copy_from_slice(self.bias.value.data());
        }
        gemm(
            batch,
            inputs,
            outputs,
            1.0,
            input.data(),
            false,
            self.weight.value.data(),
            true,
            1.0,
            out.data_mut(),
        );
        Ok(out)
    }

    fn forward(&mut self, input: &Tensor, _mode: Mode<'_>) -> Result<Tensor, NnError> {
        let out = self.infer(input)?;
        self.cache = Some(input.clone());
        Ok(out)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor, NnError> {
        let input = self.cache.as_ref().ok_or(NnError::NoCachedForward)?;
        let (inputs, outputs) = self.dims();
        let batch = input.shape()[0];
        grad_out.expect_shape(&[batch, outputs], "dense grad_out")?;
        gemm(
            outputs,
            batch,
            inputs,
            1.0,
            grad_out.data(),
            true,
            input.data(),
            false,
            1.0,
            self.weight.grad.data_mut(),
        );
        let gb = self.bias.grad.data_mut();
        for row in grad_out.data().chunks_exact(outputs) {
            for (b, g) in gb.iter_mut().zip(row) {
                *b += g;
            }
        }
        let mut grad_in = Tensor::zeros(&[batch, inputs]);
        gemm(
            batch,
            outputs,
            inputs,
            1.0,
            grad_out.data(),
            false,
            self.weight.value.data(),
            false,
            0.0,
            grad_in.data_mut(),
        );
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

/// `[B, ...] -> [B, product(...)]`.
#[derive(Debug, Default)]
pub struct Flatten {
    shape: Option<Vec<usize>>,
}

impl Flatten {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Layer for Flatten {
    fn kind(&self) -> LayerKind {
        LayerKind::Flatten
    }

    fn infer(&self, input: &Tensor) -> Result<Tensor, NnError> {
        let batch = *input
            .shape()
            .first()
            .ok_or_else(|| NnError::ShapeMismatch("flatten of a scalar".into()))?;
        let features = input.len().checked_div(batch).unwrap_or(0);
        input.clone().reshape(&[batch, features])
    }

    fn forward(&mut self, input: &Tensor, _mode: Mode<'_>) -> Result<Tensor, NnError> {
        self.shape = Some(input.shape().to_vec());
        self.infer(input)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor, NnError> {
        let shape = self.shape.as_ref().ok_or(NnError::NoCachedForward)?;
        grad_out.clone().reshape(shape)
    }
}

/// Inverted dropout. Identity in eval mode; in training mode each element
/// is zeroed with probability `rate` and survivors are scaled by
/// `1 / (1 - rate)`. The mask comes from the caller's random stream.
#[derive(Debug)]
pub struct Dropout {
    rate: f64,
    mask: Option<Vec<f64>>,
}

impl Dropout {
    pub fn new(rate: f64) -> Self {
        assert!((0.0..1.0).contains(&rate), "dropout rate must be in [0, 1)");
        Self { rate, mask: None }
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }
}

impl Layer for Dropout {
    fn kind(&self) -> LayerKind {
        LayerKind::Dropout
    }

    fn infer(&self, input: &Tensor) -> Result<Tensor, NnError> {
        Ok(input.clone())
    }

    fn forward(&mut self, input: &Tensor, mode: Mode<'_>) -> Result<Tensor, NnError> {
        let Mode::Train(rng) = mode else {
            self.mask = Some(vec![1.0; input.len()]);
            return Ok(input.clone());
        };
        let keep = 1.0 / (1.0 - self.rate);
        let mask: Vec<f64> = (0..input.len())
            .map(|_| if rng.gen::<f64>() < self.rate { 0.0 } else { keep })
            .collect();
        let data = input.data().iter().zip(&mask).map(|(x, m)| x * m).collect();
        self.mask = Some(mask);
        Tensor::new(input.shape().to_vec(), data)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor, NnError> {
        let mask = self.mask.as_ref().ok_or(NnError::NoCachedForward)?;
        if mask.len() != grad_out.len() {
            return Err(NnError::ShapeMismatch("dropout grad_out".into()));
        }
        let data = grad_out.data().iter().zip(mask).map(|(g, m)| g * m).collect();
        Tensor::new(grad_out.shape().to_vec(), data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn relu_clamps_negatives() {
        let x = Tensor::new(vec![1, 3], vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(Relu::new().infer(&x).unwrap().data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn identity_dense_is_identity() {
        let mut eye = Tensor::zeros(&[3, 3]);
        for i in 0..3 {
            eye.data_mut()[i * 3 + i] = 1.0;
        }
        let layer = Dense::from_weights("d", eye, Tensor::zeros(&[3]));
        let x = Tensor::new(vec![2, 3], vec![1.0, -2.0, 3.5, 0.25, 0.0, -7.0]).unwrap();
        assert_eq!(layer.infer(&x).unwrap(), x);
    }

    #[test]
    fn dropout_eval_is_identity_for_any_rate() {
        let x = Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        for rate in [0.0, 0.5, 0.9] {
            let mut d = Dropout::new(rate);
            assert_eq!(d.forward(&x, Mode::Eval).unwrap(), x);
            assert_eq!(d.infer(&x).unwrap(), x);
        }
    }

    #[test]
    fn dropout_train_mask_is_seeded() {
        let x = Tensor::filled(&[1, 64], 1.0);
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            Dropout::new(0.5).forward(&x, Mode::Train(&mut rng)).unwrap()
        };
        let a = run();
        assert_eq!(a, run());
        assert!(a.data().iter().all(|&v| v == 0.0 || v == 2.0));
        assert!(a.data().contains(&0.0));
    }

    #[test]
    fn flatten_round_trips_shape() {
        let mut f = Flatten::new();
        let x = Tensor::zeros(&[2, 3, 4, 5]);
        let y = f.forward(&x, Mode::Eval).unwrap();
        assert_eq!(y.shape(), &[2, 60]);
        assert_eq!(f.backward(&y).unwrap().shape(), x.shape());
    }
}
