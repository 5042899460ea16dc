use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use super::{DatasetError, Provenance};
use crate::Label;

pub const MANIFEST_HEADER: &str = "path\tsource_id\tlabel\tprovenance\tsplit";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SplitName {
    Train,
    Validation,
    Test,
    /// Not yet assigned to a split.
    Unassigned,
}

impl SplitName {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Validation => "validation",
            SplitName::Test => "test",
            SplitName::Unassigned => "none",
        }
    }
}

impl fmt::Display for SplitName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SplitName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(SplitName::Train),
            "validation" => Ok(SplitName::Validation),
            "test" => Ok(SplitName::Test),
            "none" => Ok(SplitName::Unassigned),
            _ => Err(format!("unknown split `{s}`")),
        }
    }
}

/// One manifest line. `path` is relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRecord {
    pub path: String,
    pub source_id: String,
    pub label: Label,
    pub provenance: Provenance,
    pub split: SplitName,
}

pub fn write_manifest(path: impl AsRef<Path>, records: &[ManifestRecord]) -> Result<(), DatasetError> {
    let mut out = Vec::new();
    writeln!(out, "{MANIFEST_HEADER}")?;
    for (i, r) in records.iter().enumerate() {
        for field in [&r.path, &r.source_id] {
            if field.contains(['\t', '\n', '\r']) {
                return Err(DatasetError::Manifest {
                    line: i + 2,
                    reason: format!("field {field:?} contains a tab or newline"),
                });
            }
        }
        writeln!(out, "{}\t{}\t{}\t{}\t{}", r.path, r.source_id, r.label, r.provenance, r.split)?;
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestRecord>, DatasetError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == MANIFEST_HEADER => {}
        _ => {
            return Err(DatasetError::Manifest { line: 1, reason: "missing header".into() });
        }
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let bad = |reason: String| DatasetError::Manifest { line: i + 1, reason };
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 5 {
            return Err(bad(format!("expected 5 fields, found {}", f.len())));
        }
        out.push(ManifestRecord {
            path: f[0].to_string(),
            source_id: f[1].to_string(),
            label: f[2].parse().map_err(|_| bad(format!("bad label `{}`", f[2])))?,
            provenance: f[3].parse().map_err(bad)?,
            split: f[4].parse().map_err(bad)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("manifest.tsv");
        let records = vec![
            ManifestRecord {
                path: "train/control/a__orig.pgm".into(),
                source_id: "control/a.pgm".into(),
                label: Label::Control,
                provenance: Provenance::Original,
                split: SplitName::Train,
            },
            ManifestRecord {
                path: "test/patient/b__shear.pgm".into(),
                source_id: "patient/b.pgm".into(),
                label: Label::Patient,
                provenance: Provenance::Shear(-3.25),
                split: SplitName::Test,
            },
        ];
        write_manifest(&path, &records).unwrap();
        assert_eq!(read_manifest(&path).unwrap(), records);
    }

    #[test]
    fn rejects_bad_lines() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("m.tsv");
        std::fs::write(&path, format!("{MANIFEST_HEADER}\na\tb\tmaybe\toriginal\ttrain\n")).unwrap();
        assert!(matches!(read_manifest(&path), Err(DatasetError::Manifest { line: 2, .. })));
        std::fs::write(&path, "nope\n").unwrap();
        assert!(read_manifest(&path).is_err());
    }
}
