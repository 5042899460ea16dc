//! Leak-free versus augment-then-split partitioning of the same data.
//!
//! cargo run --example split_dataset

use std::collections::HashSet;

use handscreen::augment::AugmentConfig;
use handscreen::dataset::{augment_items, stratified_split, synth_generate, DatasetSplit, SplitFractions, SynthConfig};
use handscreen::Label;

fn describe(name: &str, s: &DatasetSplit) {
    let ids = |v: &[handscreen::dataset::LabeledItem]| v.iter().map(|i| i.source_id.clone()).collect::<HashSet<String>>();
    let train = ids(&s.train);
    let leaked = ids(&s.test).intersection(&train).count();
    print!("{name:<10}");
    for (part, items) in s.parts() {
        let patients = items.iter().filter(|i| i.label == Label::Patient).count();
        print!(" {part} {} ({patients} patient)", items.len());
    }
    println!(", test sources also in train: {leaked}");
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let raw = synth_generate(&SynthConfig::default())?;
    let aug = AugmentConfig::default();
    let fractions = SplitFractions::default();

    // Augment all 240 first, then split the 720 items.
    let augment_first = stratified_split(augment_items(&raw, &aug)?, fractions, 7, false)?;
    // Split sources first; grouping by source_id keeps variants together.
    let leak_free = stratified_split(augment_items(&raw, &aug)?, fractions, 7, true)?;

    describe("augment-first", &augment_first);
    describe("leak_free", &leak_free);
    Ok(())
}
