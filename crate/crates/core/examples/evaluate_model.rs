//! Score a labeled directory with a saved model and cross-check the
//! confusion matrix against the per-item log.
//!
//! cargo run --release --example evaluate_model -- MODEL DATA_DIR

use handscreen::dataset::load_dataset;
use handscreen::harness::{evaluate, parse_prediction_log, prediction_log, preprocess_items};
use handscreen::screen::Screener;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let (Some(model), Some(data)) = (args.next(), args.next()) else {
        eprintln!("usage: evaluate_model MODEL DATA_DIR");
        std::process::exit(2);
    };
    let screener = Screener::load(&model, None)?;
    let items: Vec<_> = load_dataset(&data)?.into_iter().map(|(i, _)| i).collect();
    let items = preprocess_items(items, screener.preprocess_config())?;
    let report = evaluate(screener.model(), &items)?;
    print!("{}", report.metrics.text_block());

    let log = prediction_log(&report.predictions);
    let parsed = parse_prediction_log(&log)?;
    let hits = parsed.iter().filter(|r| r.label == r.predicted).count();
    println!("accuracy from log {:.4}, from confusion {:.4}", hits as f64 / parsed.len() as f64, report.metrics.accuracy());
    for r in parsed.iter().filter(|r| r.label != r.predicted).take(5) {
        println!("  miss {} ({}) p_patient {:.3}", r.source_id, r.provenance, r.probability_patient);
    }
    Ok(())
}
