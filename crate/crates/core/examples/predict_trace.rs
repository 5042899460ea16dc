//! Score one raw trace image with a saved model.
//!
//! cargo run --release --example predict_trace -- MODEL IMAGE

use handscreen::imaging::load_image;
use handscreen::screen::Screener;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let (Some(model), Some(image)) = (args.next(), args.next()) else {
        eprintln!("usage: predict_trace MODEL IMAGE");
        std::process::exit(2);
    };
    let screener = Screener::load(&model, None)?;
    let p = screener.screen_image(&load_image(&image)?)?;
    println!("{} model {} (crc {})", screener.arch(), model, screener.checksum_hex());
    println!("p_patient {:.4}  p_control {:.4}  -> {}", p.p_patient, p.p_control, p.label);
    println!("screening aid only, not a diagnosis");
    Ok(())
}
