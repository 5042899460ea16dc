//! Grayscale rasters, PGM/PNG I/O, Gaussian and Laplacian-of-Gaussian
//! filtering, and the crop → center/pad → LoG → normalize chain.

mod filter;
mod io;
mod preprocess;

pub use filter::{
    convolve, gaussian_kernel, laplacian_of_gaussian, log_kernel, normalize_filtermap, BorderPolicy,
    Kernel, LogPath, LAPLACIAN_5_POINT,
};
pub use io::{decode_image, encode_pgm, encode_png, load_image, save_image};
pub use preprocess::{center_pad, crop_to_content, preprocess, PreprocessConfig};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImagingError {
    #[error("unreadable image file: {0}")]
    UnreadableFile(String),
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("no ink below the threshold")]
    NoInk,
    #[error("{width}x{height} image does not fit a {target_width}x{target_height} canvas")]
    TargetTooSmall {
        width: usize,
        height: usize,
        target_width: usize,
        target_height: usize,
    },
    #[error("sigma must be positive and finite, got {0}")]
    InvalidSigma(f64),
    #[error("kernel radius must be at least 1")]
    InvalidRadius,
    #[error("image has no pixels")]
    EmptyImage,
    #[error("invalid raster: {0}")]
    InvalidRaster(String),
    #[error("config: {0}")]
    Config(#[from] crate::kv::KvError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Row-major grayscale image with intensities in `[0, 1]`
/// (0 = black ink, 1 = white paper).
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::EmptyImage);
        }
        if pixels.len() != width * height {
            return Err(ImagingError::InvalidRaster(format!(
                "{width}x{height} needs {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        if let Some(v) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(ImagingError::InvalidRaster(format!("intensity {v} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Uniform image.
    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self, ImagingError> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        f: impl Fn(usize, usize) -> f64,
    ) -> Result<Self, ImagingError> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    /// Copy of the `w × h` window whose top-left corner is `(x0, y0)`.
    pub fn sub_image(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Image, ImagingError> {
        if x0 + w > self.width || y0 + h > self.height {
            return Err(ImagingError::InvalidRaster("window outside image".into()));
        }
        Image::from_fn(w, h, |x, y| self.get(x0 + x, y0 + y))
    }

    /// Sum of `1 - intensity` over all pixels.
    pub fn ink_mass(&self) -> f64 {
        self.pixels.iter().map(|v| 1.0 - v).sum()
    }
}

/// Signed filter response, same layout as [`Image`] but unbounded.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl FilterMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::EmptyImage);
        }
        if values.len() != width * height {
            return Err(ImagingError::InvalidRaster(format!(
                "{width}x{height} needs {} values, got {}",
                width * height,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ImagingError::InvalidRaster("non-finite filter value".into()));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

impl From<&Image> for FilterMap {
    fn from(img: &Image) -> Self {
        Self {
            width: img.width,
            height: img.height,
            values: img.pixels.clone(),
        }
    }
}

/// Read access shared by [`Image`] and [`FilterMap`].
pub trait Raster {
    fn dims(&self) -> (usize, usize);
    fn samples(&self) -> &[f64];
}

impl Raster for Image {
    fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    fn samples(&self) -> &[f64] {
        &self.pixels
    }
}

impl Raster for FilterMap {
    fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    fn samples(&self) -> &[f64] {
        &self.values
    }
}
