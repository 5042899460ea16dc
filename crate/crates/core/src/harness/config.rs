use std::path::Path;

use crate::augment::AugmentConfig;
use crate::imaging::PreprocessConfig;
use crate::kv::{self, KvMap};
use crate::models::ArchId;

use super::HarnessError;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub arch: ArchId,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a validation-accuracy improvement before stopping.
    pub early_stop_patience: usize,
    pub seed: u64,
    /// Forces sequential execution where runs could otherwise overlap.
    pub deterministic: bool,
    /// Also fixes the model input size.
    pub preprocess: PreprocessConfig,
    pub augment: AugmentConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            arch: ArchId::CustomCnn,
            learning_rate: 1e-4,
            batch_size: 16,
            max_epochs: 60,
            early_stop_patience: 10,
            seed: 0,
            deterministic: false,
            preprocess: PreprocessConfig::default(),
            augment: AugmentConfig::default(),
        }
    }
}

impl TrainConfig {
    /// A zero learning rate is allowed and leaves weights untouched.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::BadConfig(m));
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return bad(format!("learning_rate {} must be finite and >= 0", self.learning_rate));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return bad("batch_size and max_epochs must be >= 1".into());
        }
        if self.early_stop_patience > self.max_epochs {
            return bad(format!(
                "early_stop_patience {} exceeds max_epochs {}",
                self.early_stop_patience, self.max_epochs
            ));
        }
        self.preprocess.validate()?;
        self.augment.validate()?;
        Ok(())
    }

    /// Flat key-value text. `preprocess_config` and `augment_config`
    /// name further config files, resolved against `base_dir`; `canvas`
    /// overrides both canvas sides.
    pub fn from_kv(text: &str, base_dir: &Path) -> Result<Self, HarnessError> {
        let mut map = KvMap::parse(text)?;
        let mut cfg = Self::default();
        let mut pp_path = String::new();
        let mut aug_path = String::new();
        let mut canvas = 0usize;
        map.take("preprocess_config", &mut pp_path)?;
        map.take("augment_config", &mut aug_path)?;
        map.take("arch", &mut cfg.arch)?;
        map.take("learning_rate", &mut cfg.learning_rate)?;
        map.take("batch_size", &mut cfg.batch_size)?;
        map.take("max_epochs", &mut cfg.max_epochs)?;
        map.take("early_stop_patience", &mut cfg.early_stop_patience)?;
        map.take("seed", &mut cfg.seed)?;
        map.take("deterministic", &mut cfg.deterministic)?;
        map.take("canvas", &mut canvas)?;
        map.finish()?;
        if !pp_path.is_empty() {
            cfg.preprocess = PreprocessConfig::load(base_dir.join(pp_path))?;
        }
        if !aug_path.is_empty() {
            cfg.augment = AugmentConfig::load(base_dir.join(aug_path))?;
        }
        if canvas > 0 {
            cfg.preprocess.canvas_w = canvas;
            cfg.preprocess.canvas_h = canvas;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_kv(&std::fs::read_to_string(path)?, base)
    }

    /// Scalar fields only; nested configs are written separately.
    pub fn to_kv(&self) -> String {
        kv::render(&[
            ("arch", self.arch.to_string()),
            ("learning_rate", self.learning_rate.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("max_epochs", self.max_epochs.to_string()),
            ("early_stop_patience", self.early_stop_patience.to_string()),
            ("seed", self.seed.to_string()),
            ("deterministic", self.deterministic.to_string()),
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_round_trip_and_references() {
        let tmp = tempfile::tempdir().unwrap();
        let pp = PreprocessConfig { sigma: 1.5, ..Default::default() };
        std::fs::write(tmp.path().join("pp.cfg"), pp.to_kv()).unwrap();
        let cfg = TrainConfig { arch: ArchId::MiniEffnet, seed: 4, max_epochs: 12, ..Default::default() };
        let text = format!("{}preprocess_config = pp.cfg\ncanvas = 64\n", cfg.to_kv());
        let back = TrainConfig::from_kv(&text, tmp.path()).unwrap();
        assert_eq!(back.arch, ArchId::MiniEffnet);
        assert_eq!((back.seed, back.max_epochs), (4, 12));
        assert_eq!(back.preprocess.sigma, 1.5);
        assert_eq!((back.preprocess.canvas_w, back.preprocess.canvas_h), (64, 64));
    }

    #[test]
    fn invariants() {
        let ok = TrainConfig::default();
        assert!(ok.validate().is_ok());
        assert!(TrainConfig { learning_rate: 0.0, ..ok.clone() }.validate().is_ok());
        assert!(TrainConfig { learning_rate: -1.0, ..ok.clone() }.validate().is_err());
        assert!(TrainConfig { batch_size: 0, ..ok.clone() }.validate().is_err());
        assert!(TrainConfig { early_stop_patience: 61, ..ok.clone() }.validate().is_err());
        assert!(TrainConfig::from_kv("bogus = 1\n", Path::new(".")).is_err());
    }
}
