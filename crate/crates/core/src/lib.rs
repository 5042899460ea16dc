// `!(x >= 0.0)` style checks are deliberate: they reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod augment;
pub mod cli;
pub mod dataset;
pub mod harness;
pub mod imaging;
pub mod kv;
pub mod label;
pub mod models;
pub mod nn;
pub mod screen;
pub mod service;

pub use label::Label;
