//! Tab-separated dataset manifest: one sample per line.

use std::path::Path;

use crate::error::{MeshError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Train => "train",
            Self::Val => "val",
            Self::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Self::Train),
            "val" => Some(Self::Val),
            "test" => Some(Self::Test),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ManifestEntry {
    pub path: String,
    pub label: u8,
    /// None until a split assignment pass has run; serialized as "-".
    pub split: Option<Split>,
}

pub fn manifest_to_string(entries: &[ManifestEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        let split = e.split.map_or("-", |s| s.name());
        out.push_str(&format!("{}\t{}\t{}\n", e.path, e.label, split));
    }
    out
}

pub fn write_manifest(entries: &[ManifestEntry], path: &Path) -> Result<()> {
    std::fs::write(path, manifest_to_string(entries))?;
    Ok(())
}

pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>> {
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |detail: String| MeshError::MalformedFile { line: i + 1, detail };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(bad(format!("expected 3 tab-separated fields, got {}", fields.len())));
        }
        let label: u8 =
            fields[1].parse().map_err(|_| bad(format!("bad label {:?}", fields[1])))?;
        if label > 4 {
            return Err(bad(format!("label {} out of range 0..=4", label)));
        }
        let split = match fields[2] {
            "-" => None,
            s => Some(
                Split::parse(s).ok_or_else(|| bad(format!("unknown split {:?}", s)))?,
            ),
        };
        entries.push(ManifestEntry { path: fields[0].to_string(), label, split });
    }
    Ok(entries)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    parse_manifest(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_entries_with_and_without_split() {
        let entries = vec![
            ManifestEntry { path: "a.ply".into(), label: 0, split: None },
            ManifestEntry { path: "b.ply".into(), label: 4, split: Some(Split::Test) },
        ];
        let text = manifest_to_string(&entries);
        assert_eq!(parse_manifest(&text).unwrap(), entries);
    }

    #[test]
    fn rejects_out_of_range_labels() {
        assert!(parse_manifest("x.ply\t9\ttrain\n").is_err());
    }

    #[test]
    fn rejects_unknown_split_names() {
        assert!(parse_manifest("x.ply\t1\tholdout\n").is_err());
    }
}
