use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DatasetError, LabeledItem, Provenance};
use crate::imaging::Image;
use crate::kv::{self, KvMap};
use crate::Label;

/// Per-class perturbation parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassParams {
    /// Peak vertical tremor in pixels.
    pub tremor_amplitude: f64,
    /// Loop height as a fraction of the nominal height.
    pub height_shrink: f64,
    /// Baseline inclination in degrees; the sign is drawn per item.
    pub baseline_drift_deg: f64,
}

impl ClassParams {
    pub const CONTROL: ClassParams = ClassParams {
        tremor_amplitude: 0.2,
        height_shrink: 1.0,
        baseline_drift_deg: 0.5,
    };
    pub const PATIENT: ClassParams = ClassParams {
        tremor_amplitude: 1.5,
        height_shrink: 0.85,
        baseline_drift_deg: 3.0,
    };
}

const CONTROL_KEYS: [&str; 3] = ["control_tremor_amplitude", "control_height_shrink", "control_baseline_drift_deg"];
const PATIENT_KEYS: [&str; 3] = ["patient_tremor_amplitude", "patient_height_shrink", "patient_baseline_drift_deg"];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub count_per_class: usize,
    pub loops: usize,
    pub control: ClassParams,
    pub patient: ClassParams,
    pub stroke_width: f64,
    /// Raw page size before preprocessing.
    pub width: usize,
    pub height: usize,
    /// Horizontal travel of the whole trace, px.
    pub advance: f64,
    /// Loop radius along x, px.
    pub loop_radius: f64,
    /// Nominal half-height of a loop, px.
    pub loop_height: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            count_per_class: 120,
            loops: 4,
            control: ClassParams::CONTROL,
            patient: ClassParams::PATIENT,
            stroke_width: 2.0,
            width: 96,
            height: 64,
            advance: 36.0,
            loop_radius: 5.0,
            loop_height: 12.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn params(&self, label: Label) -> ClassParams {
        match label {
            Label::Control => self.control,
            Label::Patient => self.patient,
        }
    }

    /// Flat key-value text; per-class keys carry a `control_` or
    /// `patient_` prefix.
    pub fn to_kv(&self) -> String {
        let mut pairs = vec![
            ("count_per_class", self.count_per_class.to_string()),
            ("loops", self.loops.to_string()),
            ("stroke_width", self.stroke_width.to_string()),
            ("width", self.width.to_string()),
            ("height", self.height.to_string()),
            ("advance", self.advance.to_string()),
            ("loop_radius", self.loop_radius.to_string()),
            ("loop_height", self.loop_height.to_string()),
            ("seed", self.seed.to_string()),
        ];
        for (keys, p) in [(CONTROL_KEYS, self.control), (PATIENT_KEYS, self.patient)] {
            pairs.push((keys[0], p.tremor_amplitude.to_string()));
            pairs.push((keys[1], p.height_shrink.to_string()));
            pairs.push((keys[2], p.baseline_drift_deg.to_string()));
        }
        kv::render(&pairs)
    }

    pub fn from_kv(text: &str) -> Result<Self, DatasetError> {
        let kv_err = |e: kv::KvError| DatasetError::BadConfig(e.to_string());
        let mut map = KvMap::parse(text).map_err(kv_err)?;
        let mut cfg = Self::default();
        map.take("count_per_class", &mut cfg.count_per_class).map_err(kv_err)?;
        map.take("loops", &mut cfg.loops).map_err(kv_err)?;
        map.take("stroke_width", &mut cfg.stroke_width).map_err(kv_err)?;
        map.take("width", &mut cfg.width).map_err(kv_err)?;
        map.take("height", &mut cfg.height).map_err(kv_err)?;
        map.take("advance", &mut cfg.advance).map_err(kv_err)?;
        map.take("loop_radius", &mut cfg.loop_radius).map_err(kv_err)?;
        map.take("loop_height", &mut cfg.loop_height).map_err(kv_err)?;
        map.take("seed", &mut cfg.seed).map_err(kv_err)?;
        for (keys, p) in [(CONTROL_KEYS, &mut cfg.control), (PATIENT_KEYS, &mut cfg.patient)] {
            map.take(keys[0], &mut p.tremor_amplitude).map_err(kv_err)?;
            map.take(keys[1], &mut p.height_shrink).map_err(kv_err)?;
            map.take(keys[2], &mut p.baseline_drift_deg).map_err(kv_err)?;
        }
        map.finish().map_err(kv_err)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, DatasetError> {
        Self::from_kv(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |m: String| Err(DatasetError::BadConfig(m));
        if self.count_per_class == 0 || self.loops == 0 {
            return bad("count_per_class and loops must be positive".into());
        }
        for (name, p) in [("control", self.control), ("patient", self.patient)] {
            if !(p.tremor_amplitude >= 0.0) || !(p.baseline_drift_deg >= 0.0) {
                return bad(format!("{name}: amplitudes must be >= 0"));
            }
            if !(p.height_shrink > 0.0 && p.height_shrink <= 1.0) {
                return bad(format!("{name}: height_shrink {} outside (0, 1]", p.height_shrink));
            }
        }
        if !(self.stroke_width > 0.0) || !(self.advance > 0.0) || !(self.loop_radius > 0.0) || !(self.loop_height > 0.0)
        {
            return bad("stroke and loop geometry must be positive".into());
        }
        if self.width < 16 || self.height < 16 {
            return bad(format!("page {}x{} is too small", self.width, self.height));
        }
        Ok(())
    }
}

/// Polyline samples of one trace; the RNG supplies per-item jitter.
fn trace_points(cfg: &SynthConfig, p: ClassParams, rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    let v = cfg.advance * rng.gen_range(0.95..1.05);
    let r = cfg.loop_radius * rng.gen_range(0.92..1.08);
    let h = cfg.loop_height * rng.gen_range(0.95..1.05);
    let phi = rng.gen_range(-0.3..0.3);
    let x0 = (cfg.width as f64 - v) / 2.0 + rng.gen_range(-4.0..4.0);
    let y0 = cfg.height as f64 / 2.0 + rng.gen_range(-3.0..3.0);
    let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let slope = (sign * p.baseline_drift_deg * rng.gen_range(0.75..1.25)).to_radians().tan();
    let (f1, f2) = (rng.gen_range(20.0..45.0), rng.gen_range(20.0..45.0));
    let (psi1, psi2) = (rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU));
    let k = cfg.loops as f64;
    let n = 400 * cfg.loops;
    (0..=n)
        .map(|i| {
            let t = i as f64 / n as f64;
            let tremor = p.tremor_amplitude * (0.6 * (TAU * f1 * t + psi1).sin() + 0.4 * (TAU * f2 * t + psi2).sin());
            let x = x0 + v * t + r * (TAU * k * t + phi).cos();
            let y = y0 + h * p.height_shrink * (TAU * k * t).sin() + slope * v * t + tremor;
            (x, y)
        })
        .collect()
}

fn segment_distance(px: f64, py: f64, (ax, ay): (f64, f64), (bx, by): (f64, f64)) -> f64 {
    let (dx, dy) = (bx - ax, by - ay);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((px - ax) * dx + (py - ay) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (cx, cy) = (ax + t * dx - px, ay + t * dy - py);
    (cx * cx + cy * cy).sqrt()
}

/// Draws a polyline in black on a white page. Coverage falls off linearly
/// over one pixel at the stroke edge.
pub fn render_trace(points: &[(f64, f64)], width: usize, height: usize, stroke_width: f64) -> Image {
    let mut dist = vec![f64::INFINITY; width * height];
    let reach = stroke_width / 2.0 + 1.0;
    for seg in points.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let lo_x = (a.0.min(b.0) - reach).floor().max(0.0) as usize;
        let hi_x = ((a.0.max(b.0) + reach).ceil().max(0.0) as usize).min(width.saturating_sub(1));
        let lo_y = (a.1.min(b.1) - reach).floor().max(0.0) as usize;
        let hi_y = ((a.1.max(b.1) + reach).ceil().max(0.0) as usize).min(height.saturating_sub(1));
        for y in lo_y..=hi_y {
            for x in lo_x..=hi_x {
                let d = segment_distance(x as f64, y as f64, a, b);
                let slot = &mut dist[y * width + x];
                if d < *slot {
                    *slot = d;
                }
            }
        }
    }
    let pixels = dist
        .into_iter()
        .map(|d| 1.0 - (stroke_width / 2.0 + 0.5 - d).clamp(0.0, 1.0))
        .collect();
    Image::new(width, height, pixels).expect("coverage stays in [0, 1]")
}

/// Renders `count_per_class` traces per class, controls first. Item `i` of
/// a class draws from its own stream so output is independent of order.
pub fn synth_generate(cfg: &SynthConfig) -> Result<Vec<LabeledItem>, DatasetError> {
    cfg.validate()?;
    let mut items = Vec::with_capacity(cfg.count_per_class * 2);
    for label in Label::BOTH {
        for i in 0..cfg.count_per_class {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(((label.index() as u64) << 32) | i as u64);
            let points = trace_points(cfg, cfg.params(label), &mut rng);
            items.push(LabeledItem {
                image: render_trace(&points, cfg.width, cfg.height, cfg.stroke_width),
                label,
                source_id: format!("synth/{}/{i:04}", label.as_str()),
                provenance: Provenance::Original,
            });
        }
    }
    Ok(items)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_balance() {
        let cfg = SynthConfig { count_per_class: 7, ..Default::default() };
        let items = synth_generate(&cfg).unwrap();
        assert_eq!(items.len(), 14);
        assert_eq!(items.iter().filter(|i| i.label == Label::Patient).count(), 7);
        let ids: std::collections::BTreeSet<_> = items.iter().map(|i| &i.source_id).collect();
        assert_eq!(ids.len(), 14);
    }

    #[test]
    fn bit_deterministic_under_seed() {
        let cfg = SynthConfig { count_per_class: 3, seed: 42, ..Default::default() };
        assert_eq!(synth_generate(&cfg).unwrap(), synth_generate(&cfg).unwrap());
        let other = SynthConfig { seed: 43, ..cfg.clone() };
        assert_ne!(synth_generate(&cfg).unwrap()[0].image, synth_generate(&other).unwrap()[0].image);
    }

    #[test]
    fn traces_have_ink_inside_page() {
        let items = synth_generate(&SynthConfig { count_per_class: 20, ..Default::default() }).unwrap();
        for item in &items {
            let img = &item.image;
            assert!(img.ink_mass() > 50.0, "{}", item.source_id);
            for x in 0..img.width() {
                assert_eq!(img.get(x, 0), 1.0);
                assert_eq!(img.get(x, img.height() - 1), 1.0);
            }
        }
    }

    #[test]
    fn render_single_segment() {
        let img = render_trace(&[(2.0, 5.0), (12.0, 5.0)], 16, 10, 2.0);
        assert_eq!(img.get(7, 5), 0.0);
        assert_eq!(img.get(7, 6), 0.5);
        assert_eq!(img.get(7, 7), 1.0);
        assert_eq!(img.get(0, 5), 1.0);
    }

    #[test]
    fn kv_round_trip() {
        let mut cfg = SynthConfig { count_per_class: 33, seed: 8, ..Default::default() };
        cfg.patient.tremor_amplitude = 2.25;
        assert_eq!(SynthConfig::from_kv(&cfg.to_kv()).unwrap(), cfg);
        assert!(SynthConfig::from_kv("patient_height_shrink = 1.5\n").is_err());
        assert!(SynthConfig::from_kv("colour = red\n").is_err());
    }

    #[test]
    fn config_checks() {
        let mut cfg = SynthConfig::default();
        cfg.patient.height_shrink = 0.0;
        assert!(synth_generate(&cfg).is_err());
        let mut cfg = SynthConfig::default();
        cfg.control.tremor_amplitude = -1.0;
        assert!(cfg.validate().is_err());
        assert!(SynthConfig { count_per_class: 0, ..Default::default() }.validate().is_err());
    }
}
