use std::fmt::Write as _;
use std::path::Path;

use crate::dataset::Provenance;
use crate::Label;

use super::HarnessError;

/// Binary confusion counts, control negative and patient positive:
/// `confusion[truth][predicted]`, i.e. `[[TN, FP], [FN, TP]]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Metrics {
    pub confusion: [[u64; 2]; 2],
}

impl Metrics {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (Label, Label)>) -> Self {
        let mut m = Metrics::default();
        for (truth, predicted) in pairs {
            m.confusion[truth.index()][predicted.index()] += 1;
        }
        m
    }

    pub fn tn(&self) -> u64 {
        self.confusion[0][0]
    }

    pub fn fp(&self) -> u64 {
        self.confusion[0][1]
    }

    pub fn fn_(&self) -> u64 {
        self.confusion[1][0]
    }

    pub fn tp(&self) -> u64 {
        self.confusion[1][1]
    }

    pub fn total(&self) -> u64 {
        self.confusion.iter().flatten().sum()
    }

    /// `(TN + TP) / total`; 0 for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        ratio(self.tn() + self.tp(), self.total())
    }

    /// Fraction of items predicted as `label` that truly are; 0 when
    /// nothing was predicted as `label`.
    pub fn precision(&self, label: Label) -> f64 {
        let c = label.index();
        ratio(self.confusion[c][c], self.confusion[0][c] + self.confusion[1][c])
    }

    /// Fraction of items of class `label` predicted as such; 0 when the
    /// class is absent.
    pub fn recall(&self, label: Label) -> f64 {
        let c = label.index();
        ratio(self.confusion[c][c], self.confusion[c][0] + self.confusion[c][1])
    }

    pub fn text_block(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "accuracy {} ({}/{})", self.accuracy(), self.tn() + self.tp(), self.total());
        let _ = writeln!(s, "confusion (rows true, columns predicted)");
        let _ = writeln!(s, "{:>10} {:>8} {:>8}", "", "control", "patient");
        for label in Label::BOTH {
            let row = self.confusion[label.index()];
            let _ = writeln!(s, "{:>10} {:>8} {:>8}", label.as_str(), row[0], row[1]);
        }
        for label in Label::BOTH {
            let _ = writeln!(
                s,
                "{:<8} precision {:.4} recall {:.4}",
                label.as_str(),
                self.precision(label),
                self.recall(label)
            );
        }
        s
    }

    /// Single-line `key=value` record.
    pub fn record_line(&self) -> String {
        format!(
            "metrics accuracy={} tn={} fp={} fn={} tp={} total={} precision_control={} recall_control={} precision_patient={} recall_patient={}",
            self.accuracy(),
            self.tn(),
            self.fp(),
            self.fn_(),
            self.tp(),
            self.total(),
            self.precision(Label::Control),
            self.recall(Label::Control),
            self.precision(Label::Patient),
            self.recall(Label::Patient),
        )
    }

    /// Reads the counts back from a [`Metrics::record_line`].
    pub fn parse_record_line(line: &str) -> Option<Metrics> {
        let rest = line.trim().strip_prefix("metrics ")?;
        let mut m = Metrics::default();
        let mut seen = 0;
        for pair in rest.split(' ') {
            let (k, v) = pair.split_once('=')?;
            let slot = match k {
                "tn" => &mut m.confusion[0][0],
                "fp" => &mut m.confusion[0][1],
                "fn" => &mut m.confusion[1][0],
                "tp" => &mut m.confusion[1][1],
                _ => continue,
            };
            *slot = v.parse().ok()?;
            seen += 1;
        }
        (seen == 4).then_some(m)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// One row of the per-item prediction log.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub source_id: String,
    pub provenance: Provenance,
    pub label: Label,
    pub predicted: Label,
    pub probability_patient: f64,
}

pub const PREDICTION_LOG_HEADER: &str = "source_id\tprovenance\tlabel\tpredicted\tprobability_patient";

pub fn prediction_log(records: &[PredictionRecord]) -> String {
    let mut s = format!("{PREDICTION_LOG_HEADER}\n");
    for r in records {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}",
            r.source_id, r.provenance, r.label, r.predicted, r.probability_patient
        );
    }
    s
}

pub fn write_prediction_log(path: impl AsRef<Path>, records: &[PredictionRecord]) -> Result<(), HarnessError> {
    std::fs::write(path, prediction_log(records))?;
    Ok(())
}

pub fn parse_prediction_log(text: &str) -> Result<Vec<PredictionRecord>, HarnessError> {
    let mut lines = text.lines();
    if lines.next() != Some(PREDICTION_LOG_HEADER) {
        return Err(HarnessError::BadConfig("prediction log lacks its header".into()));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let bad = || HarnessError::BadConfig(format!("bad prediction log line `{line}`"));
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 5 {
                return Err(bad());
            }
            Ok(PredictionRecord {
                source_id: f[0].to_string(),
                provenance: f[1].parse().map_err(|_| bad())?,
                label: f[2].parse().map_err(|_| bad())?,
                predicted: f[3].parse().map_err(|_| bad())?,
                probability_patient: f[4].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with(confusion: [[u64; 2]; 2]) -> Metrics {
        Metrics { confusion }
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(with([[12, 0], [0, 12]]).accuracy(), 1.0);
        assert_eq!(with([[11, 1], [1, 11]]).accuracy(), 22.0 / 24.0);
        assert!((with([[11, 1], [1, 11]]).accuracy() - 0.917).abs() < 5e-4);
    }

    #[test]
    fn precision_recall() {
        let m = with([[8, 2], [1, 9]]);
        assert_eq!(m.precision(Label::Patient), 9.0 / 11.0);
        assert_eq!(m.recall(Label::Patient), 9.0 / 10.0);
        assert_eq!(m.precision(Label::Control), 8.0 / 9.0);
        assert_eq!(m.recall(Label::Control), 8.0 / 10.0);
        assert_eq!(with([[5, 0], [5, 0]]).precision(Label::Patient), 0.0);
    }

    #[test]
    fn from_pairs_counts() {
        use Label::*;
        let m = Metrics::from_pairs([(Control, Control), (Control, Patient), (Patient, Patient), (Patient, Patient)]);
        assert_eq!(m.confusion, [[1, 1], [0, 2]]);
        assert_eq!(m.total(), 4);
    }

    #[test]
    fn record_line_round_trip() {
        let m = with([[11, 1], [2, 10]]);
        assert_eq!(Metrics::parse_record_line(&m.record_line()), Some(m));
        assert!(m.text_block().contains("accuracy 0.875 (21/24)"));
    }

    #[test]
    fn prediction_log_round_trip() {
        let records = vec![PredictionRecord {
            source_id: "a/b.png".into(),
            provenance: Provenance::Shear(4.5),
            label: Label::Patient,
            predicted: Label::Control,
            probability_patient: 0.123456789012345,
        }];
        assert_eq!(parse_prediction_log(&prediction_log(&records)).unwrap(), records);
    }
}
