//! Laplacian-of-Gaussian filtering and the full preprocessing chain on one
//! trace. Writes the stages next to each other as PNGs.
//!
//! cargo run --example log_filter -- [IMAGE] [OUT_DIR]

use handscreen::dataset::{synth_generate, SynthConfig};
use handscreen::imaging::{
    center_pad, crop_to_content, gaussian_kernel, laplacian_of_gaussian, load_image, log_kernel, normalize_filtermap, preprocess,
    save_image, LogPath, PreprocessConfig,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let input = args.next().filter(|s| !s.is_empty());
    let out = std::path::PathBuf::from(args.next().unwrap_or_else(|| "log_filter_out".into()));
    std::fs::create_dir_all(&out)?;

    let raw = match input {
        Some(path) => load_image(path)?,
        None => synth_generate(&SynthConfig { count_per_class: 1, ..Default::default() })?.remove(1).image,
    };
    let cfg = PreprocessConfig::default();

    let g = gaussian_kernel(cfg.sigma, cfg.radius)?;
    let l = log_kernel(cfg.sigma, cfg.radius)?;
    println!("gaussian sum {:.12}, LoG sum {:.3e}, LoG center {:.5}", g.sum(), l.sum(), l.at(0, 0));

    let cropped = crop_to_content(&raw, cfg.ink_threshold)?;
    // Pad first so the comparison stays clear of the image border.
    let margin = 2 * cfg.radius;
    let framed = center_pad(&cropped, cropped.width() + 2 * margin, cropped.height() + 2 * margin, 1.0)?;
    let analytic = laplacian_of_gaussian(&framed, cfg.sigma, cfg.radius, cfg.border, LogPath::Analytic)?;
    let two_stage = laplacian_of_gaussian(&framed, cfg.sigma, cfg.radius, cfg.border, LogPath::TwoStage)?;
    let (w, h) = (framed.width(), framed.height());
    let inner = cfg.radius + 1;
    let (mut peak, mut gap) = (0.0f64, 0.0f64);
    for y in inner..h - inner {
        for x in inner..w - inner {
            peak = peak.max(analytic.get(x, y).abs());
            gap = gap.max((analytic.get(x, y) - two_stage.get(x, y)).abs());
        }
    }
    println!("analytic vs two-stage on interior pixels: max gap {:.2}% of peak", 100.0 * gap / peak);

    save_image(&raw, out.join("raw.png"))?;
    save_image(&cropped, out.join("cropped.png"))?;
    save_image(&normalize_filtermap(&analytic), out.join("log.png"))?;
    save_image(&preprocess(&raw, &cfg)?, out.join("preprocessed.png"))?;
    println!("stages written to {}", out.display());
    Ok(())
}
