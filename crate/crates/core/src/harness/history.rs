use std::fmt::Write as _;

use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
    pub best_epoch: usize,
    /// Loss of the very first mini-batch, before any update.
    pub first_batch_loss: f64,
    pub wall_time_s: f64,
}

pub const HISTORY_HEADER: &str = "epoch\ttrain_loss\ttrain_acc\tval_loss\tval_acc";

impl TrainHistory {
    pub fn best(&self) -> Option<&EpochRecord> {
        self.records.iter().find(|r| r.epoch == self.best_epoch)
    }

    /// Tab-separated records preceded by `#` comment lines. Timing sits on
    /// the last line so runs can be compared with it stripped.
    pub fn to_tsv(&self) -> String {
        let mut s = self.to_tsv_untimed();
        let _ = writeln!(s, "# wall_time_s={}", self.wall_time_s);
        s
    }

    pub fn to_tsv_untimed(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# best_epoch={}", self.best_epoch);
        let _ = writeln!(s, "# first_batch_loss={}", self.first_batch_loss);
        let _ = writeln!(s, "{HISTORY_HEADER}");
        for r in &self.records {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}",
                r.epoch, r.train_loss, r.train_acc, r.val_loss, r.val_acc
            );
        }
        s
    }

    pub fn from_tsv(text: &str) -> Result<Self, HarnessError> {
        let mut h = TrainHistory::default();
        let bad = |line: &str| HarnessError::BadConfig(format!("bad history line `{line}`"));
        for line in text.lines().filter(|l| !l.is_empty()) {
            if let Some(meta) = line.strip_prefix("# ") {
                let (k, v) = meta.split_once('=').ok_or_else(|| bad(line))?;
                match k {
                    "best_epoch" => h.best_epoch = v.parse().map_err(|_| bad(line))?,
                    "first_batch_loss" => h.first_batch_loss = v.parse().map_err(|_| bad(line))?,
                    "wall_time_s" => h.wall_time_s = v.parse().map_err(|_| bad(line))?,
                    _ => return Err(bad(line)),
                }
            } else if line != HISTORY_HEADER {
                let f: Vec<&str> = line.split('\t').collect();
                if f.len() != 5 {
                    return Err(bad(line));
                }
                let num = |i: usize| f[i].parse::<f64>().map_err(|_| bad(line));
                h.records.push(EpochRecord {
                    epoch: f[0].parse().map_err(|_| bad(line))?,
                    train_loss: num(1)?,
                    train_acc: num(2)?,
                    val_loss: num(3)?,
                    val_acc: num(4)?,
                });
            }
        }
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tsv_round_trip_is_exact() {
        let h = TrainHistory {
            records: vec![
                EpochRecord { epoch: 1, train_loss: std::f64::consts::LN_2, train_acc: 0.5, val_loss: 0.7, val_acc: 0.5 },
                EpochRecord { epoch: 2, train_loss: 0.1 + 0.2, train_acc: 1.0 / 3.0, val_loss: 0.65, val_acc: 0.75 },
            ],
            best_epoch: 2,
            first_batch_loss: 0.70001,
            wall_time_s: 1.25,
        };
        assert_eq!(TrainHistory::from_tsv(&h.to_tsv()).unwrap(), h);
        assert_eq!(h.best().unwrap().val_acc, 0.75);
        assert!(!h.to_tsv_untimed().contains("wall_time"));
    }
}
