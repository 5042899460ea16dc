//! Loaded model plus the preprocessing it expects: the single scoring path
//! behind both `predict` and the HTTP service.

use std::path::Path;

use thiserror::Error;

use crate::imaging::{decode_image, preprocess, Image, ImagingError, PreprocessConfig};
use crate::models::{self, ArchId, LoadedModel, Model, ModelError, Prediction};

#[derive(Debug, Error)]
pub enum ScreenError {
    #[error(transparent)]
    Imaging(#[from] ImagingError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("preprocess canvas {cfg_w}x{cfg_h} differs from model input {model_w}x{model_h}")]
    CanvasMismatch {
        cfg_w: usize,
        cfg_h: usize,
        model_w: usize,
        model_h: usize,
    },
}

#[derive(Debug)]
pub struct Screener {
    model: Model,
    checksum: u32,
    preprocess: PreprocessConfig,
}

impl Screener {
    /// Without an explicit config the default chain is used with the
    /// canvas taken from the model file.
    pub fn new(loaded: LoadedModel, preprocess: Option<PreprocessConfig>) -> Result<Self, ScreenError> {
        let (h, w) = loaded.model.input_dims();
        let cfg = match preprocess {
            Some(cfg) => {
                if (cfg.canvas_w, cfg.canvas_h) != (w, h) {
                    return Err(ScreenError::CanvasMismatch {
                        cfg_w: cfg.canvas_w,
                        cfg_h: cfg.canvas_h,
                        model_w: w,
                        model_h: h,
                    });
                }
                cfg
            }
            None => PreprocessConfig {
                canvas_w: w,
                canvas_h: h,
                ..PreprocessConfig::default()
            },
        };
        cfg.validate()?;
        Ok(Self {
            model: loaded.model,
            checksum: loaded.checksum,
            preprocess: cfg,
        })
    }

    pub fn load(path: impl AsRef<Path>, preprocess: Option<PreprocessConfig>) -> Result<Self, ScreenError> {
        Self::new(models::load(path, None)?, preprocess)
    }

    pub fn arch(&self) -> ArchId {
        self.model.arch()
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn checksum(&self) -> u32 {
        self.checksum
    }

    pub fn checksum_hex(&self) -> String {
        format!("{:08x}", self.checksum)
    }

    pub fn preprocess_config(&self) -> &PreprocessConfig {
        &self.preprocess
    }

    /// Raw page in, probabilities out.
    pub fn screen_image(&self, raw: &Image) -> Result<Prediction, ScreenError> {
        let img = preprocess(raw, &self.preprocess)?;
        Ok(self.model.predict(&img)?)
    }

    pub fn screen_bytes(&self, bytes: &[u8]) -> Result<Prediction, ScreenError> {
        self.screen_image(&decode_image(bytes)?)
    }
}
