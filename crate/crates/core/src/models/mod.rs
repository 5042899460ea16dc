//! Classifier architectures, prediction and the `.sczm` model file.

mod arch;
mod file;

pub use arch::ArchId;
pub use file::{load, load_bytes, save, to_bytes, LoadedModel, FORMAT_VERSION, MAGIC};

use thiserror::Error;

use crate::imaging::Image;
use crate::label::Label;
use crate::nn::{softmax, Layer, NnError, Sequential, Tensor};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("unknown architecture `{0}`")]
    UnknownArch(String),
    #[error("{arch} cannot take a {height}x{width} input")]
    UnsupportedInput { arch: ArchId, height: usize, width: usize },
    #[error("not a model file (bad magic)")]
    BadMagic,
    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u32),
    #[error("checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    CrcMismatch { stored: u32, computed: u32 },
    #[error("model file does not match the architecture schema: {0}")]
    SchemaMismatch(String),
    #[error("model file is truncated or malformed: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Softmax output for one image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub p_control: f64,
    pub p_patient: f64,
    pub label: Label,
}

impl Prediction {
    /// Screening rule: a tie at 0.5 is labelled `Patient`.
    pub fn from_probabilities(p_control: f64, p_patient: f64) -> Self {
        let label = if p_patient >= 0.5 { Label::Patient } else { Label::Control };
        Self {
            p_control,
            p_patient,
            label,
        }
    }
}

/// Subtracted from every pixel before it enters a network.
pub const INPUT_SHIFT: f64 = 0.5;

/// A classifier: architecture id, single-channel input dims and the layer
/// stack producing two logits.
#[derive(Debug)]
pub struct Model {
    arch: ArchId,
    height: usize,
    width: usize,
    net: Sequential,
}

impl Model {
    /// Builds a freshly initialised network. Identical arguments give
    /// bit-identical parameters.
    pub fn build(arch: ArchId, height: usize, width: usize, seed: u64) -> Result<Self, ModelError> {
        Ok(Self {
            arch,
            height,
            width,
            net: arch::build_net(arch, height, width, seed)?,
        })
    }

    pub fn arch(&self) -> ArchId {
        self.arch
    }

    /// `(height, width)` of the expected single-channel input.
    pub fn input_dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn net(&self) -> &Sequential {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Sequential {
        &mut self.net
    }

    pub fn param_count(&self) -> usize {
        crate::nn::param_count(&self.net)
    }

    /// Parameter names and shapes in storage order.
    pub fn schema(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        self.net
            .visit_params(&mut |p| out.push((p.name.clone(), p.value.shape().to_vec())));
        out
    }

    /// Copies of every parameter tensor in storage order.
    pub fn snapshot(&self) -> Vec<Tensor> {
        let mut out = Vec::new();
        self.net.visit_params(&mut |p| out.push(p.value.clone()));
        out
    }

    /// Overwrites parameters from a [`Model::snapshot`] of the same schema.
    pub fn restore(&mut self, values: &[Tensor]) -> Result<(), ModelError> {
        let schema = self.schema();
        if schema.len() != values.len() {
            return Err(ModelError::SchemaMismatch(format!(
                "expected {} tensors, got {}",
                schema.len(),
                values.len()
            )));
        }
        for ((name, shape), v) in schema.iter().zip(values) {
            if v.shape() != shape.as_slice() {
                return Err(ModelError::SchemaMismatch(format!(
                    "{name}: expected {shape:?}, got {:?}",
                    v.shape()
                )));
            }
        }
        let mut i = 0;
        self.net.visit_params_mut(&mut |p| {
            p.value = values[i].clone();
            i += 1;
        });
        Ok(())
    }

    /// Packs images into a `[B,1,H,W]` batch of intensities shifted by
    /// [`INPUT_SHIFT`], which puts a blank background near zero.
    pub fn batch_tensor(&self, images: &[&Image]) -> Result<Tensor, ModelError> {
        let mut data = Vec::with_capacity(images.len() * self.height * self.width);
        for img in images {
            if (img.height(), img.width()) != (self.height, self.width) {
                return Err(NnError::ShapeMismatch(format!(
                    "model expects {}x{} input, image is {}x{}",
                    self.width,
                    self.height,
                    img.width(),
                    img.height()
                ))
                .into());
            }
            data.extend(img.pixels().iter().map(|v| v - INPUT_SHIFT));
        }
        Ok(Tensor::new(vec![images.len(), 1, self.height, self.width], data)?)
    }

    /// Eval-mode logits `[B,2]`; needs only `&self`.
    pub fn logits(&self, batch: &Tensor) -> Result<Tensor, ModelError> {
        let out = self.net.infer(batch)?;
        out.check_finite("logits")?;
        Ok(out)
    }

    pub fn predict(&self, image: &Image) -> Result<Prediction, ModelError> {
        Ok(self.predict_batch(&[image])?[0])
    }

    pub fn predict_batch(&self, images: &[&Image]) -> Result<Vec<Prediction>, ModelError> {
        let probs = softmax(&self.logits(&self.batch_tensor(images)?)?)?;
        Ok(probs
            .data()
            .chunks_exact(2)
            .map(|p| Prediction::from_probabilities(p[0], p[1]))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tie_goes_to_patient() {
        assert_eq!(Prediction::from_probabilities(0.5, 0.5).label, Label::Patient);
        assert_eq!(Prediction::from_probabilities(0.51, 0.49).label, Label::Control);
    }

    #[test]
    fn every_arch_gives_two_finite_logits() {
        for arch in ArchId::ALL {
            for size in [64, 128] {
                let m = Model::build(arch, size, size, 3).unwrap();
                let y = m.logits(&Tensor::zeros(&[1, 1, size, size])).unwrap();
                assert_eq!(y.shape(), &[1, 2], "{arch} at {size}");
            }
        }
    }

    #[test]
    fn same_seed_same_parameters() {
        let a = Model::build(ArchId::MiniEffnet, 64, 64, 42).unwrap();
        let b = Model::build(ArchId::MiniEffnet, 64, 64, 42).unwrap();
        let c = Model::build(ArchId::MiniEffnet, 64, 64, 43).unwrap();
        assert_eq!(a.snapshot(), b.snapshot());
        assert_ne!(a.snapshot(), c.snapshot());
    }

    #[test]
    fn parameter_names_are_unique() {
        for arch in ArchId::ALL {
            let m = Model::build(arch, 64, 64, 0).unwrap();
            let mut names: Vec<_> = m.schema().into_iter().map(|(n, _)| n).collect();
            let n = names.len();
            names.sort();
            names.dedup();
            assert_eq!(names.len(), n, "{arch}");
        }
    }

    #[test]
    fn custom_cnn_rejects_canvas_not_divisible_by_eight() {
        assert!(matches!(
            Model::build(ArchId::CustomCnn, 100, 100, 0),
            Err(ModelError::UnsupportedInput { .. })
        ));
    }

    #[test]
    fn arch_names_parse() {
        for arch in ArchId::ALL {
            assert_eq!(arch.name().parse::<ArchId>().unwrap(), arch);
        }
        assert!("resnet".parse::<ArchId>().is_err());
    }
}
