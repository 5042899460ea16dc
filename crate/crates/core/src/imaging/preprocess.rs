use std::path::Path;

use crate::kv::{self, KvMap};

use super::{
    laplacian_of_gaussian, normalize_filtermap, BorderPolicy, Image, ImagingError, LogPath,
};

/// Smallest image containing every pixel darker than `ink_threshold`.
pub fn crop_to_content(img: &Image, ink_threshold: f64) -> Result<Image, ImagingError> {
    let mut bounds: Option<(usize, usize, usize, usize)> = None;
    for y in 0..img.height() {
        for x in 0..img.width() {
            if img.get(x, y) < ink_threshold {
                bounds = Some(match bounds {
                    None => (x, y, x, y),
                    Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
                });
            }
        }
    }
    let (x0, y0, x1, y1) = bounds.ok_or(ImagingError::NoInk)?;
    img.sub_image(x0, y0, x1 - x0 + 1, y1 - y0 + 1)
}

/// Places `img` at offset `((tw - w) / 2, (th - h) / 2)` (floored) on a
/// `tw × th` canvas of `fill`.
pub fn center_pad(
    img: &Image,
    target_width: usize,
    target_height: usize,
    fill: f64,
) -> Result<Image, ImagingError> {
    if img.width() > target_width || img.height() > target_height {
        return Err(ImagingError::TargetTooSmall {
            width: img.width(),
            height: img.height(),
            target_width,
            target_height,
        });
    }
    let ox = (target_width - img.width()) / 2;
    let oy = (target_height - img.height()) / 2;
    Image::from_fn(target_width, target_height, |x, y| {
        if (ox..ox + img.width()).contains(&x) && (oy..oy + img.height()).contains(&y) {
            img.get(x - ox, y - oy)
        } else {
            fill
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessConfig {
    pub canvas_w: usize,
    pub canvas_h: usize,
    pub sigma: f64,
    pub radius: usize,
    pub border: BorderPolicy,
    pub ink_threshold: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            canvas_w: 128,
            canvas_h: 128,
            sigma: 2.0,
            radius: 8,
            border: BorderPolicy::Replicate,
            ink_threshold: 0.5,
        }
    }
}

impl PreprocessConfig {
    /// Background intensity used when padding.
    pub const FILL: f64 = 1.0;

    pub fn validate(&self) -> Result<(), ImagingError> {
        if self.canvas_w == 0 || self.canvas_h == 0 {
            return Err(ImagingError::EmptyImage);
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(ImagingError::InvalidSigma(self.sigma));
        }
        if self.radius == 0 {
            return Err(ImagingError::InvalidRadius);
        }
        if !(self.ink_threshold > 0.0 && self.ink_threshold < 1.0) {
            return Err(ImagingError::InvalidRaster(format!(
                "ink_threshold {} outside (0, 1)",
                self.ink_threshold
            )));
        }
        Ok(())
    }

    pub fn to_kv(&self) -> String {
        kv::render(&[
            ("canvas_w", self.canvas_w.to_string()),
            ("canvas_h", self.canvas_h.to_string()),
            ("sigma", self.sigma.to_string()),
            ("radius", self.radius.to_string()),
            ("border", self.border.to_string()),
            ("ink_threshold", self.ink_threshold.to_string()),
        ])
    }

    /// Parses a flat key-value file; absent keys keep their defaults.
    pub fn from_kv(text: &str) -> Result<Self, ImagingError> {
        let mut map = KvMap::parse(text)?;
        let mut cfg = Self::default();
        map.take("canvas_w", &mut cfg.canvas_w)?;
        map.take("canvas_h", &mut cfg.canvas_h)?;
        map.take("sigma", &mut cfg.sigma)?;
        map.take("radius", &mut cfg.radius)?;
        map.take("border", &mut cfg.border)?;
        map.take("ink_threshold", &mut cfg.ink_threshold)?;
        map.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ImagingError> {
        Self::from_kv(&std::fs::read_to_string(path)?)
    }
}

/// crop → center/pad onto the canvas → LoG (analytic kernel) → min-max
/// normalize. Output dims always equal the canvas.
pub fn preprocess(img: &Image, cfg: &PreprocessConfig) -> Result<Image, ImagingError> {
    cfg.validate()?;
    let cropped = crop_to_content(img, cfg.ink_threshold)?;
    let canvas = center_pad(&cropped, cfg.canvas_w, cfg.canvas_h, PreprocessConfig::FILL)?;
    let response = laplacian_of_gaussian(&canvas, cfg.sigma, cfg.radius, cfg.border, LogPath::Analytic)?;
    Ok(normalize_filtermap(&response))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blank_page_has_no_ink() {
        let white = Image::filled(10, 10, 1.0).unwrap();
        assert!(matches!(crop_to_content(&white, 0.5), Err(ImagingError::NoInk)));
        assert!(matches!(
            preprocess(&white, &PreprocessConfig::default()),
            Err(ImagingError::NoInk)
        ));
    }

    #[test]
    fn single_dark_pixel_crops_to_itself() {
        let img = Image::from_fn(20, 20, |x, y| if (x, y) == (5, 7) { 0.1 } else { 1.0 }).unwrap();
        let c = crop_to_content(&img, 0.5).unwrap();
        assert_eq!((c.width(), c.height()), (1, 1));
        assert_eq!(c.pixels(), &[0.1]);
    }

    #[test]
    fn pad_same_size_is_identity() {
        let img = Image::new(2, 2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(center_pad(&img, 2, 2, 1.0).unwrap(), img);
    }

    #[test]
    fn pad_centers_with_floor_offset() {
        let dot = Image::filled(1, 1, 0.0).unwrap();
        let out = center_pad(&dot, 5, 5, 1.0).unwrap();
        assert_eq!(out.get(2, 2), 0.0);
        assert_eq!(out.ink_mass(), 1.0);
        let out = center_pad(&Image::filled(1, 2, 0.0).unwrap(), 4, 5, 1.0).unwrap();
        assert_eq!((out.get(1, 1), out.get(1, 2)), (0.0, 0.0));
    }

    #[test]
    fn oversized_target_error() {
        let img = Image::filled(300, 100, 0.0).unwrap();
        assert!(matches!(
            center_pad(&img, 256, 256, 1.0),
            Err(ImagingError::TargetTooSmall { .. })
        ));
    }

    #[test]
    fn config_round_trips_through_kv() {
        let cfg = PreprocessConfig {
            canvas_w: 64,
            canvas_h: 96,
            sigma: 1.5,
            radius: 5,
            border: BorderPolicy::Reflect,
            ink_threshold: 0.4,
        };
        assert_eq!(PreprocessConfig::from_kv(&cfg.to_kv()).unwrap(), cfg);
        assert!(PreprocessConfig::from_kv("sigma = 0").is_err());
        assert!(PreprocessConfig::from_kv("colour = red").is_err());
    }

    #[test]
    fn output_has_canvas_dims() {
        let img = Image::from_fn(40, 30, |x, y| if (x + y) % 9 == 0 { 0.0 } else { 1.0 }).unwrap();
        let cfg = PreprocessConfig::default();
        let out = preprocess(&img, &cfg).unwrap();
        assert_eq!((out.width(), out.height()), (128, 128));
    }
}
