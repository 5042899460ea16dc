//! Finite-difference check of hand-written backward passes, plus a few
//! Adam steps on a conv layer.
//!
//! cargo run --release --example gradient_check

use handscreen::nn::{grad_check, AdamState, Conv2d, Dense, Layer, Mode, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);

    let mut conv = Conv2d::new("conv", 2, 3, 3, 1, 1, &mut rng);
    let x = random(&[2, 2, 6, 6], &mut rng);
    let r = grad_check(&mut conv, &x, 0)?;
    println!("conv2d  {} entries, max relative error {:.2e}", r.entries_checked, r.max_error());

    let mut dense = Dense::new("fc", 5, 4, &mut rng);
    let r = grad_check(&mut dense, &random(&[3, 5], &mut rng), 1)?;
    println!("dense   {} entries, max relative error {:.2e}", r.entries_checked, r.max_error());

    // Pull the conv output toward zero: loss = 0.5 * |y|^2, so dL/dy = y.
    let mut adam = AdamState::new(1e-2);
    for step in 0..=30 {
        let y = conv.forward(&x, Mode::Eval)?;
        if step % 10 == 0 {
            let loss: f64 = y.data().iter().map(|v| 0.5 * v * v).sum();
            println!("step {step:>2} loss {loss:.4}");
        }
        handscreen::nn::zero_grads(&mut conv);
        conv.backward(&y)?;
        adam.step_layer(&mut conv)?;
    }
    Ok(())
}
