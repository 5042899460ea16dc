//! Shear and flip one trace, then show the 3x arithmetic on a dataset.
//!
//! cargo run --example augment_traces -- [SEED]

use handscreen::augment::{augment_dataset, hflip, shear, AugmentConfig, Provenance};
use handscreen::dataset::{synth_generate, SynthConfig};
use handscreen::imaging::save_image;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(0);
    let cfg = AugmentConfig { seed, ..Default::default() };

    let items = synth_generate(&SynthConfig::default())?;
    let trace = &items[0].image;
    save_image(trace, "augment_original.png")?;
    save_image(&shear(trace, 12.0, 1.0)?, "augment_shear12.png")?;
    save_image(&hflip(trace), "augment_hflip.png")?;
    assert_eq!(hflip(&hflip(trace)), *trace);

    let pairs: Vec<_> = items.iter().map(|i| (i.image.clone(), i.label)).collect();
    let out = augment_dataset(&pairs, &cfg)?;
    println!("{} inputs -> {} outputs", pairs.len(), out.len());
    for a in out.iter().take(6) {
        println!("  source {:>3} {:<8} {}", a.source_index, a.label.to_string(), a.provenance);
    }
    let angles: Vec<f64> = out
        .iter()
        .filter_map(|a| match a.provenance {
            Provenance::Shear(d) => Some(d),
            _ => None,
        })
        .collect();
    let (lo, hi) = angles.iter().fold((f64::MAX, f64::MIN), |(lo, hi), &d| (lo.min(d), hi.max(d)));
    println!("shear angles span [{lo:.2}, {hi:.2}] degrees");
    Ok(())
}
