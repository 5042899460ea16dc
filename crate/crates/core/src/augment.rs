//! Shear and horizontal-flip augmentation with the fixed 3× policy
//! (original, one random shear, one flip).

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::imaging::Image;
use crate::kv::{self, KvError, KvMap};

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("shear angle {0} degrees is outside (-45, 45)")]
    AngleOutOfRange(f64),
    #[error("bad augment config: {0}")]
    BadConfig(String),
    #[error("config: {0}")]
    Kv(#[from] KvError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which transform produced an item.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Provenance {
    Original,
    /// Shear angle in degrees.
    Shear(f64),
    HFlip,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Original => f.write_str("original"),
            Provenance::Shear(deg) => write!(f, "shear({deg})"),
            Provenance::HFlip => f.write_str("hflip"),
        }
    }
}

impl FromStr for Provenance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "original" => Ok(Provenance::Original),
            "hflip" => Ok(Provenance::HFlip),
            _ => s
                .strip_prefix("shear(")
                .and_then(|r| r.strip_suffix(')'))
                .and_then(|deg| deg.parse().ok())
                .map(Provenance::Shear)
                .ok_or_else(|| format!("unknown provenance `{s}`")),
        }
    }
}

/// Horizontal shear `x' = x + tan(angle) * (y - h/2)`, inverse-mapped
/// with linear interpolation along each row. The middle row is fixed and
/// samples falling outside the image take `fill`.
pub fn shear(img: &Image, angle_deg: f64, fill: f64) -> Result<Image, AugmentError> {
    if !(angle_deg.abs() < 45.0) {
        return Err(AugmentError::AngleOutOfRange(angle_deg));
    }
    let slope = angle_deg.to_radians().tan();
    let (w, h) = (img.width(), img.height());
    let mid = h as f64 / 2.0;
    let sample = |x: isize, y: usize| -> f64 {
        if (0..w as isize).contains(&x) {
            img.get(x as usize, y)
        } else {
            fill
        }
    };
    let out = Image::from_fn(w, h, |x, y| {
        let sx = x as f64 - slope * (y as f64 - mid);
        let x0 = sx.floor();
        let t = sx - x0;
        let x0 = x0 as isize;
        if t == 0.0 {
            sample(x0, y)
        } else {
            sample(x0, y) * (1.0 - t) + sample(x0 + 1, y) * t
        }
    });
    Ok(out.expect("interpolated intensities stay in [0, 1]"))
}

/// Mirror left-right: pixel `(x, y)` moves to `(w - 1 - x, y)`.
pub fn hflip(img: &Image) -> Image {
    let w = img.width();
    Image::from_fn(w, img.height(), |x, y| img.get(w - 1 - x, y)).expect("same pixels")
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentConfig {
    pub shear_min_deg: f64,
    pub shear_max_deg: f64,
    /// Angles with smaller magnitude are redrawn so the sheared copy
    /// always differs from the original.
    pub min_abs_deg: f64,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            shear_min_deg: -15.0,
            shear_max_deg: 15.0,
            min_abs_deg: 1.0,
            seed: 0,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<(), AugmentError> {
        let (lo, hi) = (self.shear_min_deg, self.shear_max_deg);
        if !(lo <= hi) {
            return Err(AugmentError::BadConfig(format!("shear range [{lo}, {hi}] is empty")));
        }
        if !(lo > -45.0 && hi < 45.0) {
            return Err(AugmentError::BadConfig(format!("shear range [{lo}, {hi}] leaves (-45, 45)")));
        }
        if !(self.min_abs_deg >= 0.0) || (lo > -self.min_abs_deg && hi < self.min_abs_deg) {
            return Err(AugmentError::BadConfig(format!(
                "no angle in [{lo}, {hi}] has magnitude >= {}",
                self.min_abs_deg
            )));
        }
        Ok(())
    }

    /// Shear angle for item `index`; depends only on `(seed, index)`.
    pub fn angle_for(&self, index: usize) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        if self.shear_min_deg == self.shear_max_deg {
            return self.shear_min_deg;
        }
        loop {
            let a = rng.gen_range(self.shear_min_deg..=self.shear_max_deg);
            if a.abs() >= self.min_abs_deg {
                return a;
            }
        }
    }

    pub fn to_kv(&self) -> String {
        kv::render(&[
            ("shear_min_deg", self.shear_min_deg.to_string()),
            ("shear_max_deg", self.shear_max_deg.to_string()),
            ("min_abs_deg", self.min_abs_deg.to_string()),
            ("seed", self.seed.to_string()),
        ])
    }

    pub fn from_kv(text: &str) -> Result<Self, AugmentError> {
        let mut map = KvMap::parse(text)?;
        let mut cfg = Self::default();
        map.take("shear_min_deg", &mut cfg.shear_min_deg)?;
        map.take("shear_max_deg", &mut cfg.shear_max_deg)?;
        map.take("min_abs_deg", &mut cfg.min_abs_deg)?;
        map.take("seed", &mut cfg.seed)?;
        map.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, AugmentError> {
        Self::from_kv(&std::fs::read_to_string(path)?)
    }
}

/// One output of [`augment_dataset`].
#[derive(Debug, Clone, PartialEq)]
pub struct Augmented<L> {
    pub image: Image,
    pub label: L,
    pub source_index: usize,
    pub provenance: Provenance,
}

/// Emits original, sheared and flipped copies of every input, in that
/// order, with labels untouched. Background fill for the shear is white.
pub fn augment_dataset<L: Clone>(
    items: &[(Image, L)],
    cfg: &AugmentConfig,
) -> Result<Vec<Augmented<L>>, AugmentError> {
    cfg.validate()?;
    let mut out = Vec::with_capacity(items.len() * 3);
    for (index, (image, label)) in items.iter().enumerate() {
        let angle = cfg.angle_for(index);
        let variants = [
            (image.clone(), Provenance::Original),
            (shear(image, angle, 1.0)?, Provenance::Shear(angle)),
            (hflip(image), Provenance::HFlip),
        ];
        for (image, provenance) in variants {
            out.push(Augmented {
                image,
                label: label.clone(),
                source_index: index,
                provenance,
            });
        }
    }
    Ok(out)
}
