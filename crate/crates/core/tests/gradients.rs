mod common;

use common::*;

const TRIALS: usize = 24;

macro_rules! grad_tests {
    ($($name:ident => $layer:literal),* $(,)?) => {
        $(
            #[test]
            fn $name() {
                let r = grad_suite_layer($layer, TRIALS);
                assert!(r.passed(), "{}: max relative error {:e} over {} trials, bound {:e}", r.layer, r.max_error, r.trials, r.bound);
            }
        )*
    };
}

grad_tests! {
    conv2d => "conv2d",
    conv2d_stride2 => "conv2d_stride2",
    depthwise_conv2d => "depthwise_conv2d",
    maxpool2 => "maxpool2",
    maxpool3x3 => "maxpool3x3",
    global_avg_pool => "global_avg_pool",
    relu => "relu",
    dense => "dense",
    flatten => "flatten",
    dropout => "dropout",
    squeeze_excite => "squeeze_excite",
    inception => "inception",
    mbconv_residual => "mbconv_residual",
    mbconv_stride2 => "mbconv_stride2",
    sequential => "sequential",
}

#[test]
fn every_layer_has_a_case() {
    assert_eq!(GRAD_LAYERS.len(), 15);
}

#[test]
fn softmax_cross_entropy_gradient() {
    let e = loss_grad_error(TRIALS);
    assert!(e < 1e-6, "{e:e}");
}

