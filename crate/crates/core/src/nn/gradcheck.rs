//! Central-difference verification of analytic gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{zero_grads, Layer, Mode, NnError, Tensor};

const STEP: f64 = 1e-4;
/// Denominator floor so exact zeros on both sides count as agreement.
const FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GradCheckReport {
    pub max_input_error: f64,
    pub max_param_error: f64,
    pub entries_checked: usize,
}

impl GradCheckReport {
    pub fn max_error(&self) -> f64 {
        self.max_input_error.max(self.max_param_error)
    }
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
}

/// Compares the layer's analytic input and parameter gradients of the
/// scalar probe loss `sum(r * layer(x))`, with `r` drawn from `seed`,
/// against central differences. Every forward runs in training mode with
/// an identical random stream, so stochastic layers see a fixed mask.
pub fn grad_check(layer: &mut dyn Layer, input: &Tensor, seed: u64) -> Result<GradCheckReport, NnError> {
    let mut probe_rng = ChaCha8Rng::seed_from_u64(seed);
    let mask_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);

    let forward = |layer: &mut dyn Layer, x: &Tensor| -> Result<Tensor, NnError> {
        let mut rng = mask_rng.clone();
        layer.forward(x, Mode::Train(&mut rng))
    };

    let out = forward(layer, input)?;
    let probe: Vec<f64> = (0..out.len()).map(|_| probe_rng.gen_range(-1.0..1.0)).collect();
    let probe = Tensor::new(out.shape().to_vec(), probe)?;
    let loss = |y: &Tensor| -> f64 { y.data().iter().zip(probe.data()).map(|(a, b)| a * b).sum() };

    zero_grads(layer);
    let grad_input = layer.backward(&probe)?;
    let mut analytic_params = Vec::new();
    let mut originals = Vec::new();
    layer.visit_params(&mut |p| {
        analytic_params.push(p.grad.clone());
        originals.push(p.value.clone());
    });

    let mut report = GradCheckReport::default();
    for i in 0..input.len() {
        let mut plus = input.clone();
        plus.data_mut()[i] += STEP;
        let mut minus = input.clone();
        minus.data_mut()[i] -= STEP;
        let numeric = (loss(&forward(layer, &plus)?) - loss(&forward(layer, &minus)?)) / (2.0 * STEP);
        let err = relative_error(grad_input.data()[i], numeric);
        report.max_input_error = report.max_input_error.max(err);
        report.entries_checked += 1;
    }

    for (pi, analytic) in analytic_params.iter().enumerate() {
        for i in 0..analytic.len() {
            let original = originals[pi].data()[i];
            let eval = |delta: f64, layer: &mut dyn Layer| -> Result<f64, NnError> {
                set_param(layer, pi, i, original + delta);
                let y = forward(layer, input);
                set_param(layer, pi, i, original);
                Ok(loss(&y?))
            };
            let numeric = (eval(STEP, layer)? - eval(-STEP, layer)?) / (2.0 * STEP);
            let err = relative_error(analytic.data()[i], numeric);
            report.max_param_error = report.max_param_error.max(err);
            report.entries_checked += 1;
        }
    }
    Ok(report)
}

fn set_param(layer: &mut dyn Layer, param_index: usize, element: usize, value: f64) {
    let mut k = 0;
    layer.visit_params_mut(&mut |p| {
        if k == param_index {
            p.value.data_mut()[element] = value;
        }
        k += 1;
    });
}
