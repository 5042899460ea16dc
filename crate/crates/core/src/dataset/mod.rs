//! Labeled image collections: directory ingestion, synthetic loop traces,
//! stratified splitting and the tab-separated manifest.

mod manifest;
mod split;
mod synth;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::augment::{self, AugmentConfig, AugmentError};
pub use crate::augment::Provenance;
use crate::imaging::{self, Image, ImagingError};
use crate::Label;

pub use manifest::{read_manifest, write_manifest, ManifestRecord, SplitName};
pub use split::{stratified_split, DatasetSplit, SplitFractions};
pub use synth::{render_trace, synth_generate, ClassParams, SynthConfig};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("missing class directory {0}")]
    MissingClassDir(PathBuf),
    #[error("class directory {0} holds no images")]
    EmptyClass(PathBuf),
    #[error("class `{label}` has {count} items, at least {min} are needed")]
    TooFewItems { label: Label, count: usize, min: usize },
    #[error("bad split fractions: {0}")]
    BadFractions(String),
    #[error("source `{0}` carries more than one label")]
    MixedGroup(String),
    #[error("bad synth config: {0}")]
    BadConfig(String),
    #[error("manifest line {line}: {reason}")]
    Manifest { line: usize, reason: String },
    #[error("{path}: {source}")]
    Image { path: PathBuf, source: ImagingError },
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledItem {
    pub image: Image,
    pub label: Label,
    pub source_id: String,
    pub provenance: Provenance,
}

fn is_image_file(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "pgm"))
        .unwrap_or(false)
}

/// Image files under `dir`, depth-first, entries visited in lexicographic
/// file-name order.
pub fn image_files(dir: &Path) -> Result<Vec<PathBuf>, DatasetError> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    entries.sort();
    let mut out = Vec::new();
    for path in entries {
        if path.is_dir() {
            out.extend(image_files(&path)?);
        } else if is_image_file(&path) {
            out.push(path);
        }
    }
    Ok(out)
}

fn relative_id(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

/// Reads `root/control` and `root/patient`. Each file becomes one item
/// whose `source_id` is its path relative to `root`.
pub fn load_dir(root: impl AsRef<Path>) -> Result<Vec<LabeledItem>, DatasetError> {
    let root = root.as_ref();
    let mut class_files = Vec::new();
    for label in Label::BOTH {
        let dir = root.join(label.as_str());
        if !dir.is_dir() {
            return Err(DatasetError::MissingClassDir(dir));
        }
        let files = image_files(&dir)?;
        if files.is_empty() {
            return Err(DatasetError::EmptyClass(dir));
        }
        class_files.push((label, files));
    }
    let mut items = Vec::new();
    for (label, files) in class_files {
        for path in files {
            let image = imaging::load_image(&path).map_err(|source| DatasetError::Image {
                path: path.clone(),
                source,
            })?;
            items.push(LabeledItem {
                image,
                label,
                source_id: relative_id(root, &path),
                provenance: Provenance::Original,
            });
        }
    }
    Ok(items)
}

pub const MANIFEST_FILE: &str = "manifest.tsv";

/// Items under `root` with their recorded split. A `manifest.tsv` in `root`
/// takes precedence and supplies ids, provenance and split; otherwise this
/// is [`load_dir`] with every item unassigned.
pub fn load_dataset(root: impl AsRef<Path>) -> Result<Vec<(LabeledItem, SplitName)>, DatasetError> {
    let root = root.as_ref();
    let manifest = root.join(MANIFEST_FILE);
    if !manifest.is_file() {
        return Ok(load_dir(root)?.into_iter().map(|i| (i, SplitName::Unassigned)).collect());
    }
    read_manifest(&manifest)?
        .into_iter()
        .map(|r| {
            let path = root.join(&r.path);
            let image = imaging::load_image(&path).map_err(|source| DatasetError::Image { path, source })?;
            Ok((
                LabeledItem {
                    image,
                    label: r.label,
                    source_id: r.source_id,
                    provenance: r.provenance,
                },
                r.split,
            ))
        })
        .collect()
}

/// File name for an item inside its class directory: the source path with
/// the class prefix and extension dropped, `/` flattened to `_`, and a
/// suffix naming any augmentation.
pub fn item_file_name(item: &LabeledItem) -> String {
    let id = item.source_id.as_str();
    let id = id
        .strip_prefix(item.label.as_str())
        .and_then(|r| r.strip_prefix('/'))
        .unwrap_or(id);
    let stem = match id.rsplit_once('.') {
        Some((stem, ext)) if !ext.contains('/') => stem,
        _ => id,
    };
    let suffix = match item.provenance {
        Provenance::Original => "",
        Provenance::Shear(_) => "__shear",
        Provenance::HFlip => "__hflip",
    };
    format!("{}{suffix}.pgm", stem.replace('/', "_"))
}

/// Writes items as PGM under `root/[split/]label/` plus a manifest.
pub fn write_dataset(root: impl AsRef<Path>, items: &[(LabeledItem, SplitName)]) -> Result<(), DatasetError> {
    let root = root.as_ref();
    let mut records = Vec::with_capacity(items.len());
    for (item, split) in items {
        let mut rel = String::new();
        if *split != SplitName::Unassigned {
            rel.push_str(split.as_str());
            rel.push('/');
        }
        rel.push_str(item.label.as_str());
        rel.push('/');
        rel.push_str(&item_file_name(item));
        let path = root.join(&rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, imaging::encode_pgm(&item.image))?;
        records.push(ManifestRecord {
            path: rel,
            source_id: item.source_id.clone(),
            label: item.label,
            provenance: item.provenance,
            split: *split,
        });
    }
    write_manifest(root.join(MANIFEST_FILE), &records)
}

/// Applies the 3× augmentation policy. Variants keep the source's id and
/// label; only `provenance` distinguishes them.
pub fn augment_items(items: &[LabeledItem], cfg: &AugmentConfig) -> Result<Vec<LabeledItem>, DatasetError> {
    let pairs: Vec<(Image, Label)> = items.iter().map(|i| (i.image.clone(), i.label)).collect();
    let out = augment::augment_dataset(&pairs, cfg)?;
    Ok(out
        .into_iter()
        .map(|a| LabeledItem {
            image: a.image,
            label: a.label,
            source_id: items[a.source_index].source_id.clone(),
            provenance: a.provenance,
        })
        .collect())
}
