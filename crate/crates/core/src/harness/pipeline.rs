use crate::augment::AugmentConfig;
use crate::dataset::{self, stratified_split, DatasetSplit, LabeledItem, Provenance, SplitFractions, SplitName};
use crate::imaging::{preprocess, PreprocessConfig};

use super::HarnessError;

/// How raw items become a preprocessed train/validation/test split.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub preprocess: PreprocessConfig,
    pub augment: AugmentConfig,
    pub fractions: SplitFractions,
    pub seed: u64,
    /// Split by source before augmenting. When false, augment everything
    /// first and split individual items.
    pub leak_free: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            preprocess: PreprocessConfig::default(),
            augment: AugmentConfig::default(),
            fractions: SplitFractions::default(),
            seed: 0,
            leak_free: true,
        }
    }
}

pub fn preprocess_items(items: Vec<LabeledItem>, cfg: &PreprocessConfig) -> Result<Vec<LabeledItem>, HarnessError> {
    items
        .into_iter()
        .map(|mut item| {
            item.image = preprocess(&item.image, cfg).map_err(|source| HarnessError::Preprocess {
                source_id: item.source_id.clone(),
                source,
            })?;
            Ok(item)
        })
        .collect()
}

/// Split, augment and preprocess. Each split part augments under its own
/// seed offset so variants in different parts draw different angles.
pub fn build_split(raw: Vec<LabeledItem>, cfg: &PipelineConfig) -> Result<DatasetSplit, HarnessError> {
    let split = if cfg.leak_free {
        let split = stratified_split(raw, cfg.fractions, cfg.seed, true)?;
        let mut part = 0u64;
        split.map_parts(|items| {
            let aug = AugmentConfig {
                seed: cfg.augment.seed.wrapping_add(part),
                ..cfg.augment.clone()
            };
            part += 1;
            dataset::augment_items(&items, &aug)
        })?
    } else {
        let augmented = dataset::augment_items(&raw, &cfg.augment)?;
        stratified_split(augmented, cfg.fractions, cfg.seed, false)?
    };
    split.map_parts(|items| preprocess_items(items, &cfg.preprocess))
}

/// Builds a preprocessed split from loaded items. Items that already carry
/// split assignments are kept where they are; unassigned items that were
/// augmented earlier are split without augmenting again; raw items go
/// through [`build_split`].
pub fn split_from_dataset(
    items: Vec<(LabeledItem, SplitName)>,
    cfg: &PipelineConfig,
) -> Result<DatasetSplit, HarnessError> {
    let assigned = items.iter().filter(|(_, s)| *s != SplitName::Unassigned).count();
    if assigned == 0 {
        let raw: Vec<LabeledItem> = items.into_iter().map(|(i, _)| i).collect();
        if raw.iter().all(|i| i.provenance == Provenance::Original) {
            return build_split(raw, cfg);
        }
        let split = stratified_split(raw, cfg.fractions, cfg.seed, cfg.leak_free)?;
        return split.map_parts(|items| preprocess_items(items, &cfg.preprocess));
    }
    if assigned != items.len() {
        return Err(HarnessError::BadConfig(format!(
            "{} of {} items have no split assignment",
            items.len() - assigned,
            items.len()
        )));
    }
    let mut split = DatasetSplit {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
        seed: cfg.seed,
        leak_free: cfg.leak_free,
    };
    for (item, name) in items {
        match name {
            SplitName::Train => split.train.push(item),
            SplitName::Validation => split.validation.push(item),
            SplitName::Test => split.test.push(item),
            SplitName::Unassigned => unreachable!("counted above"),
        }
    }
    split.map_parts(|items| preprocess_items(items, &cfg.preprocess))
}
