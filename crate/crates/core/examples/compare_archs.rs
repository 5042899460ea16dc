//! Train all three architectures on one split and rank them.
//!
//! cargo run --release --example compare_archs -- [EPOCHS]
//!
//! The full 60-epoch schedule takes several minutes per architecture on
//! one core; pass a small epoch count for a quick look.

use handscreen::dataset::{synth_generate, SynthConfig};
use handscreen::harness::{build_split, compare, compare_table, PipelineConfig, TrainConfig};
use handscreen::imaging::PreprocessConfig;
use handscreen::models::ArchId;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let epochs: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(60);
    let preprocess = PreprocessConfig { canvas_w: 64, canvas_h: 64, ..Default::default() };
    let raw = synth_generate(&SynthConfig::default())?;
    let split = build_split(raw, &PipelineConfig { preprocess: preprocess.clone(), ..Default::default() })?;
    let cfg = TrainConfig {
        max_epochs: epochs,
        early_stop_patience: epochs.min(10),
        preprocess,
        ..Default::default()
    };
    let rows = compare(&ArchId::ALL, &cfg, &split)?;
    print!("{}", compare_table(&rows));
    for r in &rows {
        println!("{:<16} {:>9} parameters, {:.1}s", r.arch.name(), r.model.param_count(), r.history.wall_time_s);
    }
    Ok(())
}
