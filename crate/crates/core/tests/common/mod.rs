//! Oracles shared by the integration tests and the acceptance target.
//! Everything here is computed independently of the code under test:
//! direct loops, finite differences, closed forms.

#![allow(dead_code)]

use handscreen::imaging::{
    convolve, gaussian_kernel, laplacian_of_gaussian, log_kernel, BorderPolicy, Image, Kernel, LogPath,
    LAPLACIAN_5_POINT,
};
use handscreen::nn::{
    grad_check, softmax_cross_entropy, Conv2d, Dense, DepthwiseConv2d, Dropout, Flatten, GlobalAvgPool, Inception,
    Layer, MaxPool2, MaxPool3x3, MbConv, Relu, Sequential, SqueezeExcite, Tensor,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Result of one acceptance-level check.
pub struct Outcome {
    pub passed: bool,
    pub detail: String,
}

impl Outcome {
    pub fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self { passed, detail: detail.into() }
    }
}

/// `out(x, y) = Σ K(i, j) · I(x − i, y − j)` with zeros outside the image,
/// written as the textbook four-loop sum.
pub fn naive_convolve_zero(img: &[f64], w: usize, h: usize, kernel: &[f64], radius: usize) -> Vec<f64> {
    let side = 2 * radius + 1;
    let r = radius as isize;
    let mut out = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut acc = 0.0;
            for j in -r..=r {
                for i in -r..=r {
                    let (sx, sy) = (x - i, y - j);
                    if sx >= 0 && sy >= 0 && sx < w as isize && sy < h as isize {
                        acc += kernel[((j + r) as usize) * side + (i + r) as usize] * img[sy as usize * w + sx as usize];
                    }
                }
            }
            out[y as usize * w + x as usize] = acc;
        }
    }
    out
}

/// Full 2-D convolution of two square kernels; the result has radius
/// `ra + rb`.
pub fn full_kernel_convolution(a: &[f64], ra: usize, b: &[f64], rb: usize) -> (Vec<f64>, usize) {
    let (sa, sb) = (2 * ra + 1, 2 * rb + 1);
    let rc = ra + rb;
    let sc = 2 * rc + 1;
    let mut c = vec![0.0; sc * sc];
    for ay in 0..sa {
        for ax in 0..sa {
            for by in 0..sb {
                for bx in 0..sb {
                    c[(ay + by) * sc + ax + bx] += a[ay * sa + ax] * b[by * sb + bx];
                }
            }
        }
    }
    (c, rc)
}

/// Dark Gaussian blob on white paper.
pub fn blob(w: usize, h: usize, sigma: f64) -> Image {
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    Image::from_fn(w, h, |x, y| {
        let rr = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
        1.0 - 0.8 * (-rr / (2.0 * sigma * sigma)).exp()
    })
    .unwrap()
}

/// Bright blob on zero background, decaying to ~0 at the borders.
pub fn zero_border_blob(w: usize, h: usize, sigma: f64) -> Image {
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    Image::from_fn(w, h, |x, y| {
        let rr = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
        (-rr / (2.0 * sigma * sigma)).exp()
    })
    .unwrap()
}

/// Analytic and two-stage LoG on interior pixels of a smooth blob: worst
/// difference as a fraction of the analytic response peak.
pub fn log_paths_relative_gap(sigma: f64, radius: usize) -> f64 {
    let img = blob(64, 64, 6.0);
    let a = laplacian_of_gaussian(&img, sigma, radius, BorderPolicy::Replicate, LogPath::Analytic).unwrap();
    let b = laplacian_of_gaussian(&img, sigma, radius, BorderPolicy::Replicate, LogPath::TwoStage).unwrap();
    let margin = radius + 1;
    let mut peak: f64 = 0.0;
    let mut gap: f64 = 0.0;
    for y in margin..64 - margin {
        for x in margin..64 - margin {
            peak = peak.max(a.get(x, y).abs());
            gap = gap.max((a.get(x, y) - b.get(x, y)).abs());
        }
    }
    gap / peak
}

/// `(I ∗ G) ∗ L` against `I ∗ (G ∗ L)` with zero borders; the composite
/// kernel is built by direct full convolution.
pub fn associativity_gap() -> f64 {
    let img = zero_border_blob(48, 48, 3.0);
    let g = gaussian_kernel(2.0, 8).unwrap();
    let l = Kernel::new(1, LAPLACIAN_5_POINT.to_vec()).unwrap();
    let staged = convolve(&convolve(&img, &g, BorderPolicy::Zero).unwrap(), &l, BorderPolicy::Zero).unwrap();
    let (gl, r) = full_kernel_convolution(g.weights(), 8, &LAPLACIAN_5_POINT, 1);
    let composite = convolve(&img, &Kernel::new(r, gl).unwrap(), BorderPolicy::Zero).unwrap();
    staged
        .values()
        .iter()
        .zip(composite.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

pub struct KernelFacts {
    pub gaussian_sum_error: f64,
    pub gaussian_symmetric: bool,
    pub log_sum: f64,
    pub constant_response: f64,
}

/// Every one of the 8 symmetries of the square maps the kernel onto itself
/// bit for bit.
pub fn eightfold_symmetric(k: &Kernel) -> bool {
    let r = k.radius() as isize;
    (-r..=r).all(|y| {
        (-r..=r).all(|x| {
            let v = k.at(x, y);
            [(-x, y), (x, -y), (-x, -y), (y, x), (-y, x), (y, -x), (-y, -x)]
                .iter()
                .all(|&(a, b)| k.at(a, b) == v)
        })
    })
}

pub fn kernel_facts(sigma: f64, radius: usize) -> KernelFacts {
    let g = gaussian_kernel(sigma, radius).unwrap();
    let l = log_kernel(sigma, radius).unwrap();
    let flat = Image::filled(32, 32, 0.37).unwrap();
    let response = convolve(&flat, &l, BorderPolicy::Replicate).unwrap();
    KernelFacts {
        gaussian_sum_error: (g.weights().iter().sum::<f64>() - 1.0).abs(),
        gaussian_symmetric: eightfold_symmetric(&g),
        log_sum: l.weights().iter().sum::<f64>(),
        constant_response: response.values().iter().fold(0.0, |m, v| m.max(v.abs())),
    }
}

pub struct GradResult {
    pub layer: &'static str,
    pub trials: usize,
    pub max_error: f64,
    pub bound: f64,
}

impl GradResult {
    pub fn passed(&self) -> bool {
        self.max_error < self.bound
    }
}

fn uniform(shape: &[usize], lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}

/// Values at least 0.05 away from zero, so ReLU kinks are never crossed.
fn away_from_zero(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let m = rng.gen_range(0.05..1.0);
            if rng.gen_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

/// Distinct values spaced 0.01 apart in random order, so no pooling window
/// holds a near tie.
fn distinct(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n: usize = shape.iter().product();
    let mut data: Vec<f64> = (0..n).map(|i| i as f64 * 0.01 - 0.5).collect();
    data.shuffle(rng);
    Tensor::new(shape.to_vec(), data).unwrap()
}

type Case = (Box<dyn Layer>, Tensor);

fn grad_cases(layer: &str, rng: &mut ChaCha8Rng) -> Case {
    let c = rng.gen_range(1..=3);
    let seed = rng.gen();
    let mut lrng = ChaCha8Rng::seed_from_u64(seed);
    let lr = &mut lrng;
    match layer {
        "conv2d" => {
            let k = if rng.gen_bool(0.5) { 1 } else { 3 };
            let out = rng.gen_range(1..=3);
            (Box::new(Conv2d::new("c", c, out, k, 1, k / 2, lr)), uniform(&[2, c, 5, 5], -1.0, 1.0, rng))
        }
        "conv2d_stride2" => (
            Box::new(Conv2d::new("c", c, 2, 3, 2, 1, lr).with_floor_extent()),
            uniform(&[2, c, 6, 6], -1.0, 1.0, rng),
        ),
        "depthwise_conv2d" => {
            let stride = rng.gen_range(1..=2);
            (Box::new(DepthwiseConv2d::new("d", c, 3, stride, 1, lr)), uniform(&[2, c, 6, 6], -1.0, 1.0, rng))
        }
        "maxpool2" => (Box::new(MaxPool2::new()), distinct(&[2, c, 4, 6], rng)),
        "maxpool3x3" => (Box::new(MaxPool3x3::new()), distinct(&[2, c, 5, 4], rng)),
        "global_avg_pool" => (Box::new(GlobalAvgPool::new()), uniform(&[2, c, 3, 5], -1.0, 1.0, rng)),
        "relu" => (Box::new(Relu::new()), away_from_zero(&[3, 7], rng)),
        "dense" => {
            let (i, o) = (rng.gen_range(1..=6), rng.gen_range(1..=4));
            (Box::new(Dense::new("fc", i, o, lr)), uniform(&[3, i], -1.0, 1.0, rng))
        }
        "flatten" => (Box::new(Flatten::new()), uniform(&[2, c, 2, 3], -1.0, 1.0, rng)),
        "dropout" => (Box::new(Dropout::new(0.5)), uniform(&[4, 6], -1.0, 1.0, rng)),
        "squeeze_excite" => (Box::new(SqueezeExcite::new("se", 4, 2, lr)), uniform(&[2, 4, 3, 3], -1.0, 1.0, rng)),
        "inception" => (Box::new(Inception::new("inc", c, 2, lr)), uniform(&[1, c, 5, 5], -1.0, 1.0, rng)),
        "mbconv_residual" => (Box::new(MbConv::new("mb", 4, 4, 2, 1, 2, lr)), uniform(&[1, 4, 4, 4], -1.0, 1.0, rng)),
        "mbconv_stride2" => (Box::new(MbConv::new("mb", 2, 4, 2, 2, 2, lr)), uniform(&[1, 2, 6, 6], -1.0, 1.0, rng)),
        "sequential" => (
            Box::new(
                Sequential::new()
                    .with(Conv2d::new("c", 1, 2, 3, 1, 1, lr))
                    .with(MaxPool2::new())
                    .with(Flatten::new())
                    .with(Dense::new("fc", 8, 2, lr)),
            ),
            uniform(&[2, 1, 4, 4], -1.0, 1.0, rng),
        ),
        other => panic!("no grad case for {other}"),
    }
}

pub const GRAD_LAYERS: [&str; 15] = [
    "conv2d",
    "conv2d_stride2",
    "depthwise_conv2d",
    "maxpool2",
    "maxpool3x3",
    "global_avg_pool",
    "relu",
    "dense",
    "flatten",
    "dropout",
    "squeeze_excite",
    "inception",
    "mbconv_residual",
    "mbconv_stride2",
    "sequential",
];

/// Relative error bound: tighter for the piecewise-linear layers checked
/// away from kinks.
pub fn grad_bound(layer: &str) -> f64 {
    match layer {
        "dense" | "relu" => 1e-5,
        _ => 1e-4,
    }
}

/// Fresh layers have all-zero biases, which can park a downstream ReLU
/// exactly on its kink (a window of dead inputs outputs just the bias).
/// Random biases move every check to a generic point.
fn randomize_biases(layer: &mut dyn Layer, rng: &mut ChaCha8Rng) {
    layer.visit_params_mut(&mut |p| {
        if p.name.ends_with(".bias") {
            p.value.data_mut().iter_mut().for_each(|v| *v = rng.gen_range(-0.5..0.5));
        }
    });
}

pub fn grad_suite_layer(layer: &'static str, trials: usize) -> GradResult {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed ^ layer.len() as u64);
    let mut max_error: f64 = 0.0;
    for t in 0..trials {
        let (mut l, x) = grad_cases(layer, &mut rng);
        randomize_biases(l.as_mut(), &mut rng);
        let report = grad_check(l.as_mut(), &x, t as u64).unwrap();
        max_error = max_error.max(report.max_error());
    }
    GradResult { layer, trials, max_error, bound: grad_bound(layer) }
}

/// Finite-difference check of the softmax cross-entropy gradient.
pub fn loss_grad_error(trials: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let b = rng.gen_range(1..=5);
        let logits = uniform(&[b, 2], -3.0, 3.0, &mut rng);
        let labels: Vec<usize> = (0..b).map(|_| rng.gen_range(0..2)).collect();
        let analytic = softmax_cross_entropy(&logits, &labels).unwrap().gradient;
        for i in 0..logits.len() {
            let f = |d: f64| {
                let mut z = logits.clone();
                z.data_mut()[i] += d;
                softmax_cross_entropy(&z, &labels).unwrap().value
            };
            let numeric = (f(1e-4) - f(-1e-4)) / 2e-4;
            let a = analytic.data()[i];
            worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6));
        }
    }
    worst
}

/// A briefly trained custom_cnn saved to disk plus raw probe traces, so
/// predictions depend on the input (a fresh model's zeroed head always
/// answers 0.5).
pub struct Fixture {
    pub model_path: std::path::PathBuf,
    pub probes: Vec<Image>,
}

pub const FIXTURE_CANVAS: usize = 64;

pub fn trained_fixture(dir: &std::path::Path) -> Fixture {
    use handscreen::dataset::{synth_generate, SynthConfig};
    use handscreen::harness::{build_split, train, PipelineConfig, TrainConfig};
    use handscreen::imaging::PreprocessConfig;
    use handscreen::models::{save, ArchId};

    let preprocess = PreprocessConfig { canvas_w: FIXTURE_CANVAS, canvas_h: FIXTURE_CANVAS, ..Default::default() };
    let raw = synth_generate(&SynthConfig { count_per_class: 10, seed: 21, ..Default::default() }).unwrap();
    let split = build_split(raw, &PipelineConfig { preprocess: preprocess.clone(), seed: 21, ..Default::default() }).unwrap();
    let cfg = TrainConfig {
        arch: ArchId::CustomCnn,
        learning_rate: 1e-3,
        max_epochs: 2,
        early_stop_patience: 2,
        seed: 5,
        deterministic: true,
        preprocess,
        ..Default::default()
    };
    let (model, _) = train(&cfg, &split).unwrap();
    let model_path = dir.join("fixture.sczm");
    save(&model, &model_path).unwrap();
    let probes = synth_generate(&SynthConfig { count_per_class: 2, seed: 77, ..Default::default() })
        .unwrap()
        .into_iter()
        .map(|i| i.image)
        .collect();
    Fixture { model_path, probes }
}

pub fn png(img: &Image) -> Vec<u8> {
    handscreen::imaging::encode_png(img).unwrap()
}

/// POSTs `bytes` as the `image` field of a multipart form.
pub async fn post_image(client: &reqwest::Client, base: &str, bytes: Vec<u8>) -> reqwest::Response {
    let part = reqwest::multipart::Part::bytes(bytes).file_name("trace.png").mime_str("image/png").unwrap();
    let form = reqwest::multipart::Form::new().part("image", part);
    client.post(format!("{base}/api/v1/predict")).multipart(form).send().await.unwrap()
}

/// Status and error code of a failed response.
pub async fn error_of(resp: reqwest::Response) -> (u16, String) {
    let status = resp.status().as_u16();
    let body: serde_json::Value = resp.json().await.unwrap();
    (status, body["error"]["code"].as_str().unwrap_or("").to_string())
}
