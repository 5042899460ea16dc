//! Train one architecture on synthetic data and save it.
//!
//! cargo run --release --example train_model -- [ARCH] [EPOCHS] [OUT]
//!
//! Defaults: custom_cnn, 60 epochs (patience 10), 64x64 canvas, model.sczm.

use handscreen::dataset::{synth_generate, SynthConfig};
use handscreen::harness::{build_split, evaluate, train, PipelineConfig, TrainConfig};
use handscreen::imaging::PreprocessConfig;
use handscreen::models::{save, ArchId};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let arch: ArchId = args.next().as_deref().unwrap_or("custom_cnn").parse()?;
    let epochs: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(60);
    let out = args.next().unwrap_or_else(|| "model.sczm".into());

    let preprocess = PreprocessConfig { canvas_w: 64, canvas_h: 64, ..Default::default() };
    let raw = synth_generate(&SynthConfig::default())?;
    let split = build_split(raw, &PipelineConfig { preprocess: preprocess.clone(), ..Default::default() })?;
    println!("train {} / validation {} / test {}", split.train.len(), split.validation.len(), split.test.len());

    let cfg = TrainConfig {
        arch,
        max_epochs: epochs,
        early_stop_patience: epochs.min(10),
        preprocess,
        ..Default::default()
    };
    let (model, history) = train(&cfg, &split)?;
    println!("first batch loss {:.4} (ln 2 = {:.4})", history.first_batch_loss, 2f64.ln());
    println!("best epoch {} of {}, {:.1}s", history.best_epoch, history.records.len(), history.wall_time_s);

    let report = evaluate(&model, &split.test)?;
    print!("{}", report.metrics.text_block());
    let crc = save(&model, &out)?;
    println!("saved {out} ({} parameters, crc {crc:08x})", model.param_count());
    Ok(())
}
