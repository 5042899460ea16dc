use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{DatasetSplit, LabeledItem};
use crate::models::{ArchId, Model, Prediction};
use crate::nn::{softmax, softmax_cross_entropy, zero_grads, AdamState, Layer, Mode};


use super::history::{EpochRecord, TrainHistory};
use super::metrics::{Metrics, PredictionRecord};
use super::{HarnessError, TrainConfig};

const EVAL_BATCH: usize = 32;

/// Eval-mode predictions and mean cross-entropy over `items`.
fn score(model: &Model, items: &[LabeledItem]) -> Result<(Vec<Prediction>, f64), HarnessError> {
    let mut preds = Vec::with_capacity(items.len());
    let mut loss_sum = 0.0;
    for chunk in items.chunks(EVAL_BATCH) {
        let images: Vec<_> = chunk.iter().map(|i| &i.image).collect();
        let labels: Vec<usize> = chunk.iter().map(|i| i.label.index()).collect();
        let logits = model.logits(&model.batch_tensor(&images)?)?;
        loss_sum += softmax_cross_entropy(&logits, &labels)?.value * chunk.len() as f64;
        let probs = softmax(&logits)?;
        preds.extend(
            probs
                .data()
                .chunks_exact(2)
                .map(|p| Prediction::from_probabilities(p[0], p[1])),
        );
    }
    Ok((preds, loss_sum / items.len() as f64))
}

fn accuracy(items: &[LabeledItem], preds: &[Prediction]) -> f64 {
    let hits = items.iter().zip(preds).filter(|(i, p)| i.label == p.label).count();
    hits as f64 / items.len() as f64
}

/// Mini-batch Adam on `split.train` with a seeded shuffle every epoch.
/// Weights from the epoch with the best validation accuracy (earliest on
/// ties) are restored before returning. Parameters are rounded to `f32`
/// after every update so the saved model is exactly the trained one.
pub fn train(cfg: &TrainConfig, split: &DatasetSplit) -> Result<(Model, TrainHistory), HarnessError> {
    cfg.validate()?;
    if split.train.is_empty() {
        return Err(HarnessError::EmptySplit("train"));
    }
    if split.validation.is_empty() {
        return Err(HarnessError::EmptySplit("validation"));
    }
    let start = Instant::now();
    let mut model = Model::build(cfg.arch, cfg.preprocess.canvas_h, cfg.preprocess.canvas_w, cfg.seed)?;
    let mut adam = AdamState::new(cfg.learning_rate);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(1);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    dropout_rng.set_stream(2);

    let mut history = TrainHistory::default();
    let mut best: Option<(f64, Vec<crate::nn::Tensor>)> = None;
    let mut order: Vec<usize> = (0..split.train.len()).collect();

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        let mut hits = 0usize;
        for (batch, idx) in order.chunks(cfg.batch_size).enumerate() {
            let images: Vec<_> = idx.iter().map(|&i| &split.train[i].image).collect();
            let labels: Vec<usize> = idx.iter().map(|&i| split.train[i].label.index()).collect();
            let x = model.batch_tensor(&images)?;
            let net = model.net_mut();
            zero_grads(net);
            let logits = net.forward(&x, Mode::Train(&mut dropout_rng))?;
            let loss = softmax_cross_entropy(&logits, &labels)?;
            if !loss.value.is_finite() {
                return Err(HarnessError::DivergedLoss { epoch, batch, value: loss.value });
            }
            if epoch == 1 && batch == 0 {
                history.first_batch_loss = loss.value;
            }
            net.backward(&loss.gradient)?;
            adam.step_layer(net)?;
            net.visit_params_mut(&mut |p| p.value.round_to_f32());
            loss_sum += loss.value * idx.len() as f64;
            hits += logits
                .data()
                .chunks_exact(2)
                .zip(&labels)
                .filter(|(l, &y)| usize::from(l[1] >= l[0]) == y)
                .count();
        }
        let (val_preds, val_loss) = score(&model, &split.validation)?;
        let val_acc = accuracy(&split.validation, &val_preds);
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / order.len() as f64,
            train_acc: hits as f64 / order.len() as f64,
            val_loss,
            val_acc,
        };
        log::info!(
            "{} epoch {epoch}: train_loss {:.4} train_acc {:.3} val_loss {:.4} val_acc {:.3}",
            cfg.arch,
            record.train_loss,
            record.train_acc,
            record.val_loss,
            record.val_acc
        );
        history.records.push(record);
        if best.as_ref().is_none_or(|(acc, _)| val_acc > *acc) {
            best = Some((val_acc, model.snapshot()));
            history.best_epoch = epoch;
        }
        if epoch - history.best_epoch >= cfg.early_stop_patience {
            break;
        }
    }
    if let Some((_, weights)) = best {
        model.restore(&weights)?;
    }
    history.wall_time_s = start.elapsed().as_secs_f64();
    Ok((model, history))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub metrics: Metrics,
    pub predictions: Vec<PredictionRecord>,
}

/// Eval-mode predictions for every item plus the confusion matrix built
/// from exactly those predictions.
pub fn evaluate(model: &Model, items: &[LabeledItem]) -> Result<EvalReport, HarnessError> {
    if items.is_empty() {
        return Err(HarnessError::EmptyEval);
    }
    let (preds, _) = score(model, items)?;
    let predictions: Vec<PredictionRecord> = items
        .iter()
        .zip(&preds)
        .map(|(item, p)| PredictionRecord {
            source_id: item.source_id.clone(),
            provenance: item.provenance,
            label: item.label,
            predicted: p.label,
            probability_patient: p.p_patient,
        })
        .collect();
    let metrics = Metrics::from_pairs(predictions.iter().map(|r| (r.label, r.predicted)));
    Ok(EvalReport { metrics, predictions })
}

#[derive(Debug)]
pub struct CompareRow {
    pub arch: ArchId,
    pub test: EvalReport,
    pub history: TrainHistory,
    pub model: Model,
}

/// Trains every listed architecture on the same split and seed and ranks
/// them by test accuracy, best first; ties keep the listed order. Runs
/// overlap in threads unless `cfg.deterministic` is set.
pub fn compare(archs: &[ArchId], cfg: &TrainConfig, split: &DatasetSplit) -> Result<Vec<CompareRow>, HarnessError> {
    if archs.len() < 2 {
        return Err(HarnessError::TooFewArchs(archs.len()));
    }
    if split.test.is_empty() {
        return Err(HarnessError::EmptyEval);
    }
    let run = |arch: ArchId| -> Result<CompareRow, HarnessError> {
        let cfg = TrainConfig { arch, ..cfg.clone() };
        let (model, history) = train(&cfg, split)?;
        let test = evaluate(&model, &split.test)?;
        Ok(CompareRow { arch, test, history, model })
    };
    let results: Vec<Result<CompareRow, HarnessError>> = if cfg.deterministic {
        archs.iter().map(|&a| run(a)).collect()
    } else {
        std::thread::scope(|s| {
            let handles: Vec<_> = archs.iter().map(|&a| s.spawn(move || run(a))).collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("training thread panicked"))
                .collect()
        })
    };
    let mut rows = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    rows.sort_by(|a, b| b.test.metrics.accuracy().total_cmp(&a.test.metrics.accuracy()));
    Ok(rows)
}

/// Plain-text ranking table.
pub fn compare_table(rows: &[CompareRow]) -> String {
    let mut s = format!(
        "{:<4} {:<16} {:>10} {:>6} {:>6} {:>6} {:>6} {:>10} {:>8}\n",
        "rank", "arch", "test_acc", "tn", "fp", "fn", "tp", "best_ep", "epochs"
    );
    for (i, r) in rows.iter().enumerate() {
        let m = &r.test.metrics;
        s.push_str(&format!(
            "{:<4} {:<16} {:>10.4} {:>6} {:>6} {:>6} {:>6} {:>10} {:>8}\n",
            i + 1,
            r.arch.name(),
            m.accuracy(),
            m.tn(),
            m.fp(),
            m.fn_(),
            m.tp(),
            r.history.best_epoch,
            r.history.records.len()
        ));
    }
    s
}

