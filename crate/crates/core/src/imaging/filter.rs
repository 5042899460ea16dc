use std::fmt;
use std::str::FromStr;

use super::{FilterMap, Image, ImagingError, Raster};

/// How samples outside the raster are synthesised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BorderPolicy {
    /// Nearest edge pixel.
    #[default]
    Replicate,
    /// Mirror about the edge pixel without repeating it (`-1 -> 1`).
    Reflect,
    Zero,
}

impl fmt::Display for BorderPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BorderPolicy::Replicate => "replicate",
            BorderPolicy::Reflect => "reflect",
            BorderPolicy::Zero => "zero",
        })
    }
}

impl FromStr for BorderPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "replicate" => Ok(Self::Replicate),
            "reflect" => Ok(Self::Reflect),
            "zero" => Ok(Self::Zero),
            other => Err(format!("unknown border policy `{other}`")),
        }
    }
}

/// Square kernel of side `2 * radius + 1`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    radius: usize,
    weights: Vec<f64>,
}

impl Kernel {
    pub fn new(radius: usize, weights: Vec<f64>) -> Result<Self, ImagingError> {
        let side = 2 * radius + 1;
        if weights.len() != side * side {
            return Err(ImagingError::InvalidRaster(format!(
                "kernel of radius {radius} needs {} weights, got {}",
                side * side,
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(ImagingError::InvalidRaster("non-finite kernel weight".into()));
        }
        Ok(Self { radius, weights })
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn side(&self) -> usize {
        2 * self.radius + 1
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weight at offset `(dx, dy)` from the center.
    pub fn at(&self, dx: isize, dy: isize) -> f64 {
        let r = self.radius as isize;
        self.weights[((dy + r) * self.side() as isize + dx + r) as usize]
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Discrete Laplacian stencil used by [`LogPath::TwoStage`].
pub const LAPLACIAN_5_POINT: [f64; 9] = [0.0, 1.0, 0.0, 1.0, -4.0, 1.0, 0.0, 1.0, 0.0];

fn check_params(sigma: f64, radius: usize) -> Result<(), ImagingError> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(ImagingError::InvalidSigma(sigma));
    }
    if radius == 0 {
        return Err(ImagingError::InvalidRadius);
    }
    if (radius as f64) < (2.0 * sigma).ceil() {
        log::warn!("kernel radius {radius} truncates a sigma={sigma} Gaussian below 2 sigma");
    }
    Ok(())
}

/// Unnormalised `exp(-(x² + y²) / 2σ²)` on the integer grid.
fn gaussian_profile(sigma: f64, radius: usize) -> Vec<f64> {
    let r = radius as isize;
    let two_var = 2.0 * sigma * sigma;
    let mut w = Vec::with_capacity((2 * radius + 1).pow(2));
    for y in -r..=r {
        for x in -r..=r {
            w.push((-((x * x + y * y) as f64) / two_var).exp());
        }
    }
    w
}

/// Gaussian kernel normalised to unit sum.
pub fn gaussian_kernel(sigma: f64, radius: usize) -> Result<Kernel, ImagingError> {
    check_params(sigma, radius)?;
    let mut w = gaussian_profile(sigma, radius);
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    Kernel::new(radius, w)
}

/// Laplacian of the unit-sum Gaussian,
/// `(x² + y² − 2σ²) / σ⁴ · G(x, y)`, then shifted by its mean so the
/// weights sum to zero and flat regions give no response.
pub fn log_kernel(sigma: f64, radius: usize) -> Result<Kernel, ImagingError> {
    let gauss = gaussian_kernel(sigma, radius)?;
    let r = radius as isize;
    let var = sigma * sigma;
    let mut w = Vec::with_capacity(gauss.weights.len());
    for y in -r..=r {
        for x in -r..=r {
            let rr = (x * x + y * y) as f64;
            w.push((rr - 2.0 * var) / (var * var) * gauss.at(x, y));
        }
    }
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    w.iter_mut().for_each(|v| *v -= mean);
    Kernel::new(radius, w)
}

fn border_index(i: isize, n: usize, border: BorderPolicy) -> Option<usize> {
    let n = n as isize;
    if (0..n).contains(&i) {
        return Some(i as usize);
    }
    match border {
        BorderPolicy::Zero => None,
        BorderPolicy::Replicate => Some(i.clamp(0, n - 1) as usize),
        BorderPolicy::Reflect => {
            if n == 1 {
                return Some(0);
            }
            let period = 2 * (n - 1);
            let m = i.rem_euclid(period);
            Some(if m < n { m } else { period - m } as usize)
        }
    }
}

/// True 2-D convolution (kernel flipped): `out(x, y) = Σ K(i, j) · I(x − i, y − j)`.
/// Output dims equal input dims.
pub fn convolve<R: Raster + ?Sized>(
    src: &R,
    kernel: &Kernel,
    border: BorderPolicy,
) -> Result<FilterMap, ImagingError> {
    let (w, h) = src.dims();
    if w == 0 || h == 0 {
        return Err(ImagingError::EmptyImage);
    }
    let data = src.samples();
    let r = kernel.radius;
    let (pw, ph) = (w + 2 * r, h + 2 * r);
    let mut padded = vec![0.0; pw * ph];
    for py in 0..ph {
        let sy = border_index(py as isize - r as isize, h, border);
        for px in 0..pw {
            let sx = border_index(px as isize - r as isize, w, border);
            if let (Some(sx), Some(sy)) = (sx, sy) {
                padded[py * pw + px] = data[sy * w + sx];
            }
        }
    }
    // Flip once so the inner loop is a plain correlation over the padded buffer.
    let side = kernel.side();
    let flipped: Vec<f64> = kernel.weights.iter().rev().copied().collect();
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for ky in 0..side {
                let row = &padded[(y + ky) * pw + x..(y + ky) * pw + x + side];
                let krow = &flipped[ky * side..(ky + 1) * side];
                for (a, b) in row.iter().zip(krow) {
                    acc += a * b;
                }
            }
            out[y * w + x] = acc;
        }
    }
    FilterMap::new(w, h, out)
}

/// Which side of `Δ(I ∗ G) = I ∗ ΔG` to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogPath {
    /// One convolution with [`log_kernel`].
    #[default]
    Analytic,
    /// Gaussian blur followed by the 5-point discrete Laplacian.
    TwoStage,
}

pub fn laplacian_of_gaussian(
    img: &Image,
    sigma: f64,
    radius: usize,
    border: BorderPolicy,
    path: LogPath,
) -> Result<FilterMap, ImagingError> {
    match path {
        LogPath::Analytic => convolve(img, &log_kernel(sigma, radius)?, border),
        LogPath::TwoStage => {
            let blurred = convolve(img, &gaussian_kernel(sigma, radius)?, border)?;
            let stencil = Kernel::new(1, LAPLACIAN_5_POINT.to_vec())?;
            convolve(&blurred, &stencil, border)
        }
    }
}

/// Global min-max rescale to `[0, 1]`; a constant map becomes all 0.5.
pub fn normalize_filtermap(fm: &FilterMap) -> Image {
    let (lo, hi) = fm
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let pixels = if hi > lo {
        let span = hi - lo;
        fm.values().iter().map(|&v| (v - lo) / span).collect()
    } else {
        vec![0.5; fm.values().len()]
    };
    Image::new(fm.width(), fm.height(), pixels).expect("min-max output lies in [0, 1]")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize) -> Image {
        Image::from_fn(w, h, |x, y| ((x * 7 + y * 3) % 11) as f64 / 10.0).unwrap()
    }

    #[test]
    fn invalid_sigma_rejected() {
        assert!(matches!(gaussian_kernel(0.0, 3), Err(ImagingError::InvalidSigma(_))));
        assert!(matches!(log_kernel(-1.0, 3), Err(ImagingError::InvalidSigma(_))));
        assert!(matches!(gaussian_kernel(f64::NAN, 3), Err(ImagingError::InvalidSigma(_))));
        assert!(matches!(gaussian_kernel(1.0, 0), Err(ImagingError::InvalidRadius)));
    }

    #[test]
    fn small_gaussian_peaks_at_center() {
        let k = gaussian_kernel(1.0, 1).unwrap();
        let c = k.at(0, 0);
        for (dx, dy) in [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)] {
            assert!(c > k.at(dx, dy));
        }
        assert_eq!(k.at(1, 0), k.at(0, 1));
        assert_eq!(k.at(1, 0), k.at(-1, 0));
        assert_eq!(k.at(1, 1), k.at(-1, -1));
    }

    #[test]
    fn log_center_is_minimum() {
        for (s, r) in [(1.0, 3), (2.0, 8), (1.4, 4)] {
            let k = log_kernel(s, r).unwrap();
            let min = k.weights().iter().copied().fold(f64::INFINITY, f64::min);
            assert_eq!(k.at(0, 0), min);
        }
    }

    #[test]
    fn identity_kernel_is_identity() {
        let mut w = vec![0.0; 9];
        w[4] = 1.0;
        let k = Kernel::new(1, w).unwrap();
        let img = ramp(6, 5);
        for border in [BorderPolicy::Replicate, BorderPolicy::Reflect, BorderPolicy::Zero] {
            assert_eq!(convolve(&img, &k, border).unwrap().values(), img.pixels());
        }
    }

    #[test]
    fn box_filter_keeps_constant() {
        let k = Kernel::new(1, vec![1.0 / 9.0; 9]).unwrap();
        let img = Image::filled(7, 4, 0.3).unwrap();
        let out = convolve(&img, &k, BorderPolicy::Replicate).unwrap();
        assert!(out.values().iter().all(|v| (v - 0.3).abs() < 1e-15));
    }

    #[test]
    fn convolution_flips_the_kernel() {
        // Impulse response of a true convolution reproduces the kernel itself.
        let k = Kernel::new(1, (1..=9).map(f64::from).collect()).unwrap();
        let img = Image::from_fn(5, 5, |x, y| if (x, y) == (2, 2) { 1.0 } else { 0.0 }).unwrap();
        let out = convolve(&img, &k, BorderPolicy::Zero).unwrap();
        for dy in -1..=1isize {
            for dx in -1..=1isize {
                let v = out.get((2 + dx) as usize, (2 + dy) as usize);
                assert_eq!(v, k.at(dx, dy));
            }
        }
    }

    #[test]
    fn reflect_indexing() {
        assert_eq!(border_index(-1, 5, BorderPolicy::Reflect), Some(1));
        assert_eq!(border_index(5, 5, BorderPolicy::Reflect), Some(3));
        assert_eq!(border_index(-9, 5, BorderPolicy::Reflect), Some(1));
        assert_eq!(border_index(-3, 5, BorderPolicy::Replicate), Some(0));
        assert_eq!(border_index(-1, 5, BorderPolicy::Zero), None);
    }

    #[test]
    fn normalization_rules() {
        let constant = FilterMap::new(2, 2, vec![-3.0; 4]).unwrap();
        assert_eq!(normalize_filtermap(&constant).pixels(), &[0.5; 4]);
        let fm = FilterMap::new(3, 1, vec![-2.0, 0.0, 2.0]).unwrap();
        assert_eq!(normalize_filtermap(&fm).pixels(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn step_edge_response_is_odd() {
        // Dark left half, bright right half; the edge lies between columns 15 and 16.
        let img = Image::from_fn(32, 9, |x, _| if x < 16 { 0.0 } else { 1.0 }).unwrap();
        for path in [LogPath::Analytic, LogPath::TwoStage] {
            let fm = laplacian_of_gaussian(&img, 2.0, 8, BorderPolicy::Replicate, path).unwrap();
            let row: Vec<f64> = (0..32).map(|x| fm.get(x, 4)).collect();
            let peak = row.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for d in 0..8 {
                let left = row[15 - d];
                let right = row[16 + d];
                assert!((left + right).abs() < 1e-9 * peak.max(1.0), "{path:?} d={d}");
            }
            assert!(row[15] > 0.0 && row[16] < 0.0, "{path:?}: sign change at the edge");
        }
    }
}
