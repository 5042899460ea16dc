//! Binary PGM (`P5`) and 8-bit PNG reading and writing.

use std::path::Path;

use image::{ColorType, DynamicImage, ImageFormat};

use super::{Image, ImagingError};

const PNG_SIGNATURE: &[u8] = b"\x89PNG\r\n\x1a\n";

/// Rec. 709 luma of 8-bit RGB, scaled to `[0, 1]`.
fn luma(r: u8, g: u8, b: u8) -> f64 {
    ((0.2126 * r as f64 + 0.7152 * g as f64 + 0.0722 * b as f64) / 255.0).clamp(0.0, 1.0)
}

pub fn load_image(path: impl AsRef<Path>) -> Result<Image, ImagingError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)
        .map_err(|e| ImagingError::UnreadableFile(format!("{}: {e}", path.display())))?;
    decode_image(&bytes)
}

/// Decodes PGM or PNG bytes, sniffing the format from the leading bytes.
pub fn decode_image(bytes: &[u8]) -> Result<Image, ImagingError> {
    if bytes.starts_with(b"P5") {
        decode_pgm(bytes)
    } else if bytes.starts_with(PNG_SIGNATURE) {
        decode_png(bytes)
    } else {
        Err(ImagingError::UnsupportedFormat(
            "expected binary PGM (P5) or PNG".into(),
        ))
    }
}

fn decode_pgm(bytes: &[u8]) -> Result<Image, ImagingError> {
    // Header: magic, width, height, maxval separated by whitespace, with
    // `#` comments allowed; one whitespace byte precedes the raster.
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(ImagingError::UnreadableFile("truncated PGM header".into()));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    let parse = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| ImagingError::UnreadableFile(format!("bad PGM header field `{s}`")))
    };
    let (width, height, maxval) = (parse(&fields[1])?, parse(&fields[2])?, parse(&fields[3])?);
    if maxval == 0 || maxval > 255 {
        return Err(ImagingError::UnsupportedFormat(format!("PGM maxval {maxval}")));
    }
    let raster = bytes
        .get(pos..pos + width * height)
        .ok_or_else(|| ImagingError::UnreadableFile("truncated PGM raster".into()))?;
    let scale = maxval as f64;
    Image::new(
        width,
        height,
        raster.iter().map(|&b| (b as f64 / scale).min(1.0)).collect(),
    )
}

fn decode_png(bytes: &[u8]) -> Result<Image, ImagingError> {
    let decoded = image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| ImagingError::UnreadableFile(e.to_string()))?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let pixels: Vec<f64> = match decoded.color() {
        ColorType::L8 | ColorType::La8 => decoded
            .to_luma8()
            .into_raw()
            .into_iter()
            .map(|v| v as f64 / 255.0)
            .collect(),
        ColorType::Rgb8 | ColorType::Rgba8 => decoded
            .to_rgb8()
            .pixels()
            .map(|p| luma(p[0], p[1], p[2]))
            .collect(),
        other => {
            return Err(ImagingError::UnsupportedFormat(format!(
                "PNG color type {other:?} (only 8-bit gray or RGB)"
            )))
        }
    };
    Image::new(w, h, pixels)
}

fn quantize(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

pub fn encode_pgm(img: &Image) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.pixels().iter().map(|&v| quantize(v)));
    out
}

pub fn encode_png(img: &Image) -> Result<Vec<u8>, ImagingError> {
    let raw: Vec<u8> = img.pixels().iter().map(|&v| quantize(v)).collect();
    let buf = image::GrayImage::from_raw(img.width() as u32, img.height() as u32, raw)
        .ok_or_else(|| ImagingError::InvalidRaster("raster size".into()))?;
    let mut out = std::io::Cursor::new(Vec::new());
    DynamicImage::ImageLuma8(buf)
        .write_to(&mut out, ImageFormat::Png)
        .map_err(|e| ImagingError::UnsupportedFormat(e.to_string()))?;
    Ok(out.into_inner())
}

/// Writes PNG when the extension is `.png`, PGM otherwise.
pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<(), ImagingError> {
    let path = path.as_ref();
    let is_png = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("png"));
    let bytes = if is_png { encode_png(img)? } else { encode_pgm(img) };
    std::fs::write(path, bytes)?;
    Ok(())
}
