//! `.sczm` model files.
//!
//! ```text
//! "SCZM"                      4 bytes magic
//! version        u32 LE       currently 1
//! arch           u8           1 custom_cnn, 2 mini_inception, 3 mini_effnet
//! input height   u32 LE
//! input width    u32 LE
//! tensor count   u32 LE
//! per tensor:
//!   name length  u32 LE, name (UTF-8)
//!   rank         u32 LE, dims (u32 LE each)
//!   values       f32 LE, row-major
//! crc32          u32 LE       CRC-32 (IEEE) of every preceding byte
//! ```

use std::path::Path;

use crate::nn::{Layer, Tensor};

use super::{ArchId, Model, ModelError};

pub const MAGIC: &[u8; 4] = b"SCZM";
pub const FORMAT_VERSION: u32 = 1;

/// A model read from disk together with its file checksum.
#[derive(Debug)]
pub struct LoadedModel {
    pub model: Model,
    pub checksum: u32,
}

impl LoadedModel {
    pub fn checksum_hex(&self) -> String {
        format!("{:08x}", self.checksum)
    }
}

pub fn to_bytes(model: &Model) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(model.arch().code());
    let (h, w) = model.input_dims();
    out.extend_from_slice(&(h as u32).to_le_bytes());
    out.extend_from_slice(&(w as u32).to_le_bytes());
    let mut tensors = Vec::new();
    model
        .net()
        .visit_params(&mut |p| tensors.push((p.name.clone(), p.value.clone())));
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, value) in &tensors {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(value.rank() as u32).to_le_bytes());
        for &d in value.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in value.data() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

/// Writes the model and returns the file checksum.
pub fn save(model: &Model, path: impl AsRef<Path>) -> Result<u32, ModelError> {
    let bytes = to_bytes(model);
    std::fs::write(path, &bytes)?;
    let tail: [u8; 4] = bytes[bytes.len() - 4..].try_into().expect("4 bytes");
    Ok(u32::from_le_bytes(tail))
}

/// Reads a model file. With `expected` set, a file for any other
/// architecture is a [`ModelError::SchemaMismatch`].
pub fn load(path: impl AsRef<Path>, expected: Option<ArchId>) -> Result<LoadedModel, ModelError> {
    load_bytes(&std::fs::read(path)?, expected)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| ModelError::Malformed(format!("need {n} bytes at offset {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

pub fn load_bytes(bytes: &[u8], expected: Option<ArchId>) -> Result<LoadedModel, ModelError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(ModelError::BadMagic);
    }
    if bytes.len() < 8 {
        return Err(ModelError::Malformed("missing header".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(ModelError::CrcMismatch { stored, computed });
    }

    let mut r = Reader { bytes: body, pos: 4 };
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(ModelError::UnsupportedVersion(version));
    }
    let code = r.take(1)?[0];
    let arch = ArchId::from_code(code)
        .ok_or_else(|| ModelError::UnknownArch(format!("code {code}")))?;
    if let Some(want) = expected {
        if want != arch {
            return Err(ModelError::SchemaMismatch(format!("file holds {arch}, expected {want}")));
        }
    }
    let height = r.u32()? as usize;
    let width = r.u32()? as usize;
    let mut model = Model::build(arch, height, width, 0)?;
    let schema = model.schema();

    let count = r.u32()? as usize;
    if count != schema.len() {
        return Err(ModelError::SchemaMismatch(format!(
            "{arch} has {} tensors, file has {count}",
            schema.len()
        )));
    }
    let mut values = Vec::with_capacity(count);
    for (name, shape) in &schema {
        let len = r.u32()? as usize;
        let got_name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| ModelError::Malformed("tensor name is not UTF-8".into()))?;
        let rank = r.u32()? as usize;
        let dims = (0..rank)
            .map(|_| r.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>, _>>()?;
        if got_name != name || &dims != shape {
            return Err(ModelError::SchemaMismatch(format!(
                "expected {name} {shape:?}, found {got_name} {dims:?}"
            )));
        }
        let n: usize = dims.iter().product();
        let raw = r.take(n * 4)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect();
        values.push(Tensor::new(dims, data)?);
    }
    if r.pos != body.len() {
        return Err(ModelError::Malformed(format!(
            "{} trailing bytes before checksum",
            body.len() - r.pos
        )));
    }
    model.restore(&values)?;
    Ok(LoadedModel {
        model,
        checksum: stored,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probe(model: &Model) -> Vec<f64> {
        let (h, w) = model.input_dims();
        let data = (0..h * w).map(|i| ((i * 37) % 101) as f64 / 100.0).collect();
        let x = Tensor::new(vec![1, 1, h, w], data).unwrap();
        model.logits(&x).unwrap().into_data()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for arch in ArchId::ALL {
            let m = Model::build(arch, 32, 32, 5).unwrap();
            let loaded = load_bytes(&to_bytes(&m), None).unwrap();
            assert_eq!(loaded.model.arch(), arch);
            assert_eq!(loaded.model.snapshot(), m.snapshot());
            assert_eq!(probe(&loaded.model), probe(&m));
        }
    }

    #[test]
    fn corrupted_last_byte_fails_crc() {
        let mut bytes = to_bytes(&Model::build(ArchId::CustomCnn, 16, 16, 1).unwrap());
        *bytes.last_mut().unwrap() ^= 0xff;
        assert!(matches!(load_bytes(&bytes, None), Err(ModelError::CrcMismatch { .. })));
    }

    #[test]
    fn wrong_schema_is_rejected() {
        let bytes = to_bytes(&Model::build(ArchId::CustomCnn, 16, 16, 1).unwrap());
        assert!(matches!(
            load_bytes(&bytes, Some(ArchId::MiniInception)),
            Err(ModelError::SchemaMismatch(_))
        ));
    }

    #[test]
    fn bad_magic_and_version() {
        assert!(matches!(load_bytes(b"NOPE1234", None), Err(ModelError::BadMagic)));
        let mut bytes = to_bytes(&Model::build(ArchId::MiniEffnet, 16, 16, 1).unwrap());
        bytes[4] = 2;
        let n = bytes.len();
        let crc = crc32fast::hash(&bytes[..n - 4]);
        bytes[n - 4..].copy_from_slice(&crc.to_le_bytes());
        assert!(matches!(load_bytes(&bytes, None), Err(ModelError::UnsupportedVersion(2))));
    }

    #[test]
    fn renamed_tensor_is_schema_mismatch() {
        let mut bytes = to_bytes(&Model::build(ArchId::CustomCnn, 16, 16, 1).unwrap());
        // First tensor name starts right after the 21-byte header and its length.
        let at = 4 + 4 + 1 + 4 + 4 + 4 + 4;
        assert_eq!(&bytes[at..at + 5], b"conv1");
        bytes[at + 4] = b'9';
        let n = bytes.len();
        let crc = crc32fast::hash(&bytes[..n - 4]);
        bytes[n - 4..].copy_from_slice(&crc.to_le_bytes());
        assert!(matches!(load_bytes(&bytes, None), Err(ModelError::SchemaMismatch(_))));
    }
}
