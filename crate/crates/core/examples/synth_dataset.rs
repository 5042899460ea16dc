//! Render synthetic loop traces and write them as a labeled directory.
//!
//! cargo run --example synth_dataset -- [OUT_DIR] [PER_CLASS]

use handscreen::dataset::{load_dir, synth_generate, write_dataset, SplitName, SynthConfig};
use handscreen::Label;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "synth_data".into());
    let per_class = args.next().map(|s| s.parse()).transpose()?.unwrap_or(120);

    let cfg = SynthConfig { count_per_class: per_class, ..Default::default() };
    let items = synth_generate(&cfg)?;

    for label in Label::BOTH {
        let class: Vec<_> = items.iter().filter(|i| i.label == label).collect();
        let ink = class.iter().map(|i| i.image.ink_mass()).sum::<f64>() / class.len() as f64;
        println!("{label}: {} traces, mean ink mass {ink:.1}", class.len());
    }

    let tagged: Vec<_> = items.into_iter().map(|i| (i, SplitName::Unassigned)).collect();
    write_dataset(&out, &tagged)?;
    // Reading it back goes through the same loader the CLI uses.
    let back = load_dir(&out)?;
    println!("wrote {} images to {out}", back.len());
    Ok(())
}
