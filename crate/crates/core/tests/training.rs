use handscreen::dataset::{synth_generate, DatasetSplit, SynthConfig};
use handscreen::harness::{
    build_split, compare, evaluate, parse_prediction_log, prediction_log, train, HarnessError, Metrics,
    PipelineConfig, TrainConfig,
};
use handscreen::imaging::PreprocessConfig;
use handscreen::models::{to_bytes, ArchId, Model};
use handscreen::Label;

const SIDE: usize = 64;

fn small_split(per_class: usize, seed: u64) -> DatasetSplit {
    let raw = synth_generate(&SynthConfig { count_per_class: per_class, seed, ..Default::default() }).unwrap();
    let cfg = PipelineConfig { preprocess: canvas(), seed, ..Default::default() };
    build_split(raw, &cfg).unwrap()
}

fn canvas() -> PreprocessConfig {
    PreprocessConfig { canvas_w: SIDE, canvas_h: SIDE, ..Default::default() }
}

fn quick(arch: ArchId, epochs: usize) -> TrainConfig {
    TrainConfig {
        arch,
        max_epochs: epochs,
        early_stop_patience: epochs,
        seed: 11,
        deterministic: true,
        preprocess: canvas(),
        ..Default::default()
    }
}

#[test]
fn zero_learning_rate_leaves_initial_weights() {
    let split = small_split(10, 1);
    for arch in ArchId::ALL {
        let cfg = TrainConfig { learning_rate: 0.0, ..quick(arch, 2) };
        let (model, _) = train(&cfg, &split).unwrap();
        let fresh = Model::build(arch, SIDE, SIDE, cfg.seed).unwrap();
        assert_eq!(model.snapshot(), fresh.snapshot(), "{arch}");
    }
}

#[test]
fn first_batch_loss_is_near_ln2() {
    let split = small_split(10, 2);
    for arch in ArchId::ALL {
        let (_, h) = train(&quick(arch, 1), &split).unwrap();
        assert!((h.first_batch_loss - 2f64.ln()).abs() <= 0.2, "{arch}: {}", h.first_batch_loss);
    }
}

#[test]
fn deterministic_runs_are_bit_identical() {
    let split = small_split(10, 3);
    let cfg = TrainConfig { learning_rate: 1e-3, ..quick(ArchId::CustomCnn, 3) };
    let (a, ha) = train(&cfg, &split).unwrap();
    let (b, hb) = train(&cfg, &split).unwrap();
    assert_eq!(to_bytes(&a), to_bytes(&b));
    assert_eq!(ha.to_tsv_untimed(), hb.to_tsv_untimed());
    assert_eq!(ha.first_batch_loss.to_bits(), hb.first_batch_loss.to_bits());
    assert_eq!(evaluate(&a, &split.test).unwrap(), evaluate(&b, &split.test).unwrap());
}

#[test]
fn memorizes_a_tiny_training_set() {
    let mut split = small_split(10, 4);
    split.train.clear();
    split.train.extend(split.validation.iter().cloned());
    split.train.extend(split.test.iter().cloned());
    // Validation mirrors train so the restored weights are the best fit.
    split.validation = split.train.clone();
    let cfg = TrainConfig { learning_rate: 1e-3, ..quick(ArchId::CustomCnn, 50) };
    let (model, _) = train(&cfg, &split).unwrap();
    let report = evaluate(&model, &split.train).unwrap();
    assert_eq!(report.metrics.accuracy(), 1.0, "{:?}", report.metrics);
}

#[test]
fn restored_weights_match_the_best_validation_epoch() {
    let split = small_split(10, 5);
    let cfg = TrainConfig { learning_rate: 1e-3, ..quick(ArchId::MiniEffnet, 6) };
    let (model, h) = train(&cfg, &split).unwrap();
    let best = h.best().unwrap();
    assert!(h.records.iter().all(|r| r.val_acc <= best.val_acc));
    let again = evaluate(&model, &split.validation).unwrap();
    assert_eq!(again.metrics.accuracy(), best.val_acc);
}

#[test]
fn metrics_agree_with_the_prediction_log() {
    let split = small_split(10, 6);
    let (model, _) = train(&TrainConfig { learning_rate: 1e-3, ..quick(ArchId::CustomCnn, 2) }, &split).unwrap();
    let report = evaluate(&model, &split.test).unwrap();
    let m = report.metrics;
    assert_eq!(m.total() as usize, split.test.len());
    assert_eq!(m.tn() + m.fp() + m.fn_() + m.tp(), m.total());
    assert_eq!(m.accuracy(), (m.tn() + m.tp()) as f64 / m.total() as f64);

    let parsed = parse_prediction_log(&prediction_log(&report.predictions)).unwrap();
    assert_eq!(parsed, report.predictions);
    let hits = parsed.iter().filter(|r| r.label == r.predicted).count();
    assert_eq!(m.accuracy(), hits as f64 / parsed.len() as f64);
    for r in &parsed {
        assert_eq!(r.predicted == Label::Patient, r.probability_patient >= 0.5);
    }
    assert_eq!(Metrics::parse_record_line(&m.record_line()), Some(m));
}

#[test]
fn compare_same_arch_twice_is_identical() {
    let split = small_split(10, 7);
    let rows = compare(&[ArchId::MiniInception, ArchId::MiniInception], &quick(ArchId::CustomCnn, 2), &split).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].test, rows[1].test);
    assert_eq!(to_bytes(&rows[0].model), to_bytes(&rows[1].model));
}

#[test]
fn empty_splits_are_rejected() {
    let mut split = small_split(10, 8);
    split.validation.clear();
    assert!(matches!(train(&quick(ArchId::CustomCnn, 1), &split), Err(HarnessError::EmptySplit("validation"))));
    let model = Model::build(ArchId::CustomCnn, SIDE, SIDE, 0).unwrap();
    assert!(matches!(evaluate(&model, &[]), Err(HarnessError::EmptyEval)));
}
