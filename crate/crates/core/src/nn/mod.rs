//! Minimal convolutional network engine with hand-written backward passes.
//!
//! Activations are batched: convolutional tensors are `[batch, channels,
//! height, width]`, dense tensors are `[batch, features]`. Layers cache what
//! they need during [`Layer::forward`] and accumulate parameter gradients in
//! [`Layer::backward`]. [`Layer::infer`] is the cache-free eval path and
//! only needs `&self`, so a trained model can serve concurrent callers.
//!
//! Inside networks "convolution" means cross-correlation (no kernel flip).

mod adam;
mod blocks;
mod conv;
mod gemm;
mod gradcheck;
mod layers;
mod loss;
mod pool;
mod tensor;

pub use adam::AdamState;
pub use blocks::{Inception, MbConv, Sequential, SqueezeExcite};
pub use conv::{conv2d, conv2d_backward, Conv2d, Conv2dGrads, DepthwiseConv2d};
pub use gemm::gemm;
pub use gradcheck::{grad_check, GradCheckReport};
pub use layers::{Dense, Dropout, Flatten, Relu};
pub use loss::{softmax, softmax_cross_entropy, LossValue};
pub use pool::{GlobalAvgPool, MaxPool2, MaxPool3x3};
pub use tensor::Tensor;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("backward called without a cached forward pass")]
    NoCachedForward,
    #[error("max pooling needs even spatial dims, got {0}x{1}")]
    OddSpatialDim(usize, usize),
    #[error("label {0} is not a class id (expected 0 or 1)")]
    BadLabel(usize),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("tensor dump: {0}")]
    Dump(String),
}

/// Execution mode for a forward pass. Training mode carries the random
/// stream used by stochastic layers.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut ChaCha8Rng),
}

impl Mode<'_> {
    pub fn reborrow(&mut self) -> Mode<'_> {
        match self {
            Mode::Eval => Mode::Eval,
            Mode::Train(rng) => Mode::Train(rng),
        }
    }

    pub fn is_train(&self) -> bool {
        matches!(self, Mode::Train(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Conv2d,
    DepthwiseConv2d,
    MaxPool2,
    MaxPool3x3,
    Relu,
    Dense,
    Flatten,
    GlobalAvgPool,
    Dropout,
    SigmoidGate,
    Sequential,
    Inception,
    MbConv,
}

/// A named trainable tensor with its accumulated gradient.
#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
}

impl Param {
    pub fn new(name: impl Into<String>, value: Tensor) -> Self {
        let grad = Tensor::zeros(value.shape());
        Self {
            name: name.into(),
            value,
            grad,
        }
    }
}

pub trait Layer: Send + Sync + std::fmt::Debug {
    fn kind(&self) -> LayerKind;

    /// Eval-mode forward pass without touching any cache.
    fn infer(&self, input: &Tensor) -> Result<Tensor, NnError>;

    /// Forward pass that caches activations for [`Layer::backward`].
    fn forward(&mut self, input: &Tensor, mode: Mode<'_>) -> Result<Tensor, NnError>;

    /// Returns the gradient w.r.t. the last forward input and adds parameter
    /// gradients into each [`Param::grad`].
    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor, NnError>;

    fn visit_params(&self, _f: &mut dyn FnMut(&Param)) {}

    fn visit_params_mut(&mut self, _f: &mut dyn FnMut(&mut Param)) {}
}

pub fn zero_grads(layer: &mut dyn Layer) {
    layer.visit_params_mut(&mut |p| p.grad.fill(0.0));
}

pub fn param_count(layer: &dyn Layer) -> usize {
    let mut n = 0;
    layer.visit_params(&mut |p| n += p.value.len());
    n
}

/// He-uniform weights: `U(-sqrt(6 / fan_in), sqrt(6 / fan_in))`, values
/// rounded to `f32` so they survive the model file unchanged.
pub fn he_uniform(shape: &[usize], fan_in: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let limit = (6.0 / fan_in as f64).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| rng.gen_range(-limit..limit) as f32 as f64)
        .collect();
    Tensor::new(shape.to_vec(), data).expect("length matches shape")
}
