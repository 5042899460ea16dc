//! Save, reload and deliberately corrupt a model file.
//!
//! cargo run --release --example model_file

use handscreen::imaging::Image;
use handscreen::models::{load_bytes, to_bytes, ArchId, Model, ModelError};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let probe = Image::from_fn(64, 64, |x, y| if (x + y) % 9 == 0 { 0.0 } else { 1.0 })?;
    for arch in ArchId::ALL {
        let model = Model::build(arch, 64, 64, 3)?;
        let bytes = to_bytes(&model);
        let back = load_bytes(&bytes, Some(arch))?;
        let same = back.model.predict(&probe)? == model.predict(&probe)?;
        println!(
            "{:<16} {:>8} params, {:>9} bytes, crc {}, identical predictions {same}",
            arch.name(),
            model.param_count(),
            bytes.len(),
            back.checksum_hex()
        );
    }

    let mut bytes = to_bytes(&Model::build(ArchId::CustomCnn, 64, 64, 3)?);
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x10;
    match load_bytes(&bytes, None) {
        Err(e @ ModelError::CrcMismatch { .. }) => println!("flipped one bit: {e}"),
        other => println!("unexpected: {:?}", other.map(|m| m.checksum)),
    }
    match load_bytes(&to_bytes(&Model::build(ArchId::MiniEffnet, 64, 64, 0)?), Some(ArchId::CustomCnn)) {
        Err(e) => println!("wrong architecture: {e}"),
        Ok(_) => println!("unexpected: loaded"),
    }
    Ok(())
}
