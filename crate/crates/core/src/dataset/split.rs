use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DatasetError, LabeledItem};
use crate::Label;

/// Minimum items per class accepted by [`stratified_split`].
pub const MIN_PER_CLASS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitFractions {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self { train: 0.8, validation: 0.1, test: 0.1 }
    }
}

impl SplitFractions {
    fn validate(&self) -> Result<(), DatasetError> {
        let all = [self.train, self.validation, self.test];
        if all.iter().any(|f| !(*f >= 0.0)) || (all.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(DatasetError::BadFractions(format!("{all:?} must be nonnegative and sum to 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<LabeledItem>,
    pub validation: Vec<LabeledItem>,
    pub test: Vec<LabeledItem>,
    pub seed: u64,
    pub leak_free: bool,
}

impl DatasetSplit {
    pub fn parts(&self) -> [(&'static str, &[LabeledItem]); 3] {
        [("train", &self.train), ("validation", &self.validation), ("test", &self.test)]
    }

    pub fn map_parts<E>(
        self,
        mut f: impl FnMut(Vec<LabeledItem>) -> Result<Vec<LabeledItem>, E>,
    ) -> Result<Self, E> {
        Ok(Self {
            train: f(self.train)?,
            validation: f(self.validation)?,
            test: f(self.test)?,
            seed: self.seed,
            leak_free: self.leak_free,
        })
    }
}

/// Validation and test take `floor(n * fraction)` units each and train keeps
/// the remainder. Each list is filled per class from a seeded shuffle.
///
/// With `leak_free` the unit is a `source_id` group, so every variant of a
/// source lands in the same list. Otherwise each item is its own unit.
pub fn stratified_split(
    items: Vec<LabeledItem>,
    fractions: SplitFractions,
    seed: u64,
    leak_free: bool,
) -> Result<DatasetSplit, DatasetError> {
    fractions.validate()?;
    let mut groups: Vec<(Label, Vec<LabeledItem>)> = Vec::new();
    if leak_free {
        let mut index = std::collections::HashMap::new();
        for item in items {
            match index.get(&item.source_id) {
                Some(&g) => {
                    let (label, members): &mut (Label, Vec<LabeledItem>) = &mut groups[g];
                    if *label != item.label {
                        return Err(DatasetError::MixedGroup(item.source_id));
                    }
                    members.push(item);
                }
                None => {
                    index.insert(item.source_id.clone(), groups.len());
                    groups.push((item.label, vec![item]));
                }
            }
        }
    } else {
        groups = items.into_iter().map(|i| (i.label, vec![i])).collect();
    }

    let mut split = DatasetSplit {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
        seed,
        leak_free,
    };
    let mut by_class: [Vec<Vec<LabeledItem>>; 2] = [Vec::new(), Vec::new()];
    for (label, members) in groups {
        by_class[label.index()].push(members);
    }
    for label in Label::BOTH {
        let count = by_class[label.index()].iter().map(Vec::len).sum::<usize>();
        if count < MIN_PER_CLASS {
            return Err(DatasetError::TooFewItems { label, count, min: MIN_PER_CLASS });
        }
    }
    let n = by_class[0].len() + by_class[1].len();
    let n_val = (n as f64 * fractions.validation).floor() as usize;
    let n_test = (n as f64 * fractions.test).floor() as usize;
    let quota = class_quotas(by_class[0].len(), n, [n_val, n_test]);
    for label in Label::BOTH {
        let mut class = std::mem::take(&mut by_class[label.index()]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(label.index() as u64);
        class.shuffle(&mut rng);
        let [q_val, q_test] = quota[label.index()];
        for (i, members) in class.into_iter().enumerate() {
            let dest = if i < q_val {
                &mut split.validation
            } else if i < q_val + q_test {
                &mut split.test
            } else {
                &mut split.train
            };
            dest.extend(members);
        }
    }
    Ok(split)
}

/// Per-class `[validation, test]` unit counts. Cumulative boundaries are
/// rounded to the nearest unit, so each list's class count is within one
/// of exact proportionality and the columns still sum to the split sizes.
fn class_quotas(n_control: usize, n: usize, sizes: [usize; 2]) -> [[usize; 2]; 2] {
    let rounded = |s: usize| (2 * s * n_control + n) / (2 * n);
    let c_val = rounded(sizes[0]);
    let c_test = rounded(sizes[0] + sizes[1]) - c_val;
    [[c_val, c_test], [sizes[0] - c_val, sizes[1] - c_test]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::AugmentConfig;
    use crate::dataset::{augment_items, Provenance};
    use crate::imaging::Image;
    use std::collections::HashSet;

    fn items(control: usize, patient: usize) -> Vec<LabeledItem> {
        let img = Image::filled(4, 4, 1.0).unwrap();
        (0..control + patient)
            .map(|i| LabeledItem {
                image: img.clone(),
                label: if i < control { Label::Control } else { Label::Patient },
                source_id: format!("s{i}"),
                provenance: Provenance::Original,
            })
            .collect()
    }

    fn sizes(s: &DatasetSplit) -> (usize, usize, usize) {
        (s.train.len(), s.validation.len(), s.test.len())
    }

    #[test]
    fn sizes_for_240_and_720() {
        let s = stratified_split(items(120, 120), SplitFractions::default(), 1, true).unwrap();
        assert_eq!(sizes(&s), (192, 24, 24));
        let aug = augment_items(&items(120, 120), &AugmentConfig::default()).unwrap();
        let s = stratified_split(aug.clone(), SplitFractions::default(), 1, false).unwrap();
        assert_eq!(sizes(&s), (576, 72, 72));
        let s = stratified_split(aug, SplitFractions::default(), 1, true).unwrap();
        assert_eq!(sizes(&s), (576, 72, 72));
        let ids = |v: &[LabeledItem]| v.iter().map(|i| i.source_id.clone()).collect::<HashSet<_>>();
        assert!(ids(&s.train).is_disjoint(&ids(&s.test)));
        assert!(ids(&s.train).is_disjoint(&ids(&s.validation)));
        assert!(ids(&s.validation).is_disjoint(&ids(&s.test)));
    }

    #[test]
    fn quotas_stay_within_one_of_proportional() {
        for n_control in 10..60 {
            for n_patient in 10..60 {
                let n = n_control + n_patient;
                let sizes = [n / 10, n / 10];
                let q = class_quotas(n_control, n, sizes);
                let train = [n_control - q[0][0] - q[0][1], n_patient - q[1][0] - q[1][1]];
                let counts = [[q[0][0], q[0][1], train[0]], [q[1][0], q[1][1], train[1]]];
                let part = [sizes[0], sizes[1], n - sizes[0] - sizes[1]];
                for (class, size) in [n_control, n_patient].into_iter().enumerate() {
                    for k in 0..3 {
                        let exact = part[k] as f64 * size as f64 / n as f64;
                        assert!((counts[class][k] as f64 - exact).abs() <= 1.0, "{n_control}/{n_patient}");
                    }
                }
            }
        }
    }

    #[test]
    fn remainder_goes_to_train() {
        let s = stratified_split(items(15, 13), SplitFractions::default(), 3, false).unwrap();
        assert_eq!(sizes(&s), (24, 2, 2));
    }

    #[test]
    fn too_few_and_bad_fractions() {
        assert!(matches!(
            stratified_split(items(9, 20), SplitFractions::default(), 0, true),
            Err(DatasetError::TooFewItems { label: Label::Control, count: 9, .. })
        ));
        let bad = SplitFractions { train: 0.5, validation: 0.1, test: 0.1 };
        assert!(matches!(stratified_split(items(20, 20), bad, 0, true), Err(DatasetError::BadFractions(_))));
    }

    #[test]
    fn reproducible_and_seed_sensitive() {
        let a = stratified_split(items(30, 30), SplitFractions::default(), 5, true).unwrap();
        let b = stratified_split(items(30, 30), SplitFractions::default(), 5, true).unwrap();
        let c = stratified_split(items(30, 30), SplitFractions::default(), 6, true).unwrap();
        let ids = |s: &DatasetSplit| s.test.iter().map(|i| i.source_id.clone()).collect::<Vec<_>>();
        assert_eq!(ids(&a), ids(&b));
        assert_ne!(ids(&a), ids(&c));
    }

    #[test]
    fn mixed_label_group_rejected() {
        let mut v = items(12, 12);
        v[20].source_id = "s0".into();
        assert!(matches!(
            stratified_split(v, SplitFractions::default(), 0, true),
            Err(DatasetError::MixedGroup(_))
        ));
    }
}
