//! Optional key=value config files plus the shared value parsers. Explicit
//! flags always win over the file, which wins over built-in defaults.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use cgat_explain::ScoreMerge;
use cgat_graph::ClsMode;
use cgat_mesh::FeatureChannels;
use cgat_model::{AttentionKind, HeadMerge};

use crate::error::{file_error, CliError, Result};

/// Every key any subcommand understands. Validated on load so a typo fails
/// loudly instead of silently falling back to a default. Path arguments are
/// deliberately flag-only.
const KNOWN_KEYS: &[&str] = &[
    "arch",
    "attention",
    "batch-size",
    "blocks",
    "cls",
    "epochs",
    "features",
    "head-merge",
    "heads",
    "hidden",
    "lr",
    "per-class",
    "profile",
    "renormalize",
    "repeats",
    "rollout-head-merge",
    "seed",
    "split",
    "target-vertices",
    "total",
];

#[derive(Debug, Default)]
pub struct FileConfig {
    values: BTreeMap<String, String>,
}

impl FileConfig {
    /// Load the file named by a `--config` flag, or an empty config when
    /// the flag was not given.
    pub fn from_flag(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => Self::load(p),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| file_error(path, e))?;
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |detail: String| {
                CliError::Usage(format!("{} line {}: {}", path.display(), i + 1, detail))
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got {raw:?}")))?;
            let key = key.trim();
            let value = value.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(bad(format!("unknown config key {key:?}")));
            }
            if values.insert(key.to_string(), value.to_string()).is_some() {
                return Err(bad(format!("duplicate config key {key:?}")));
            }
        }
        Ok(Self { values })
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// Parse a numeric key, turning parse failures into usage errors.
    pub fn number<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| {
                CliError::Usage(format!("config key {key}: cannot parse {v:?}"))
            }),
        }
    }
}

fn usage_choice(what: &str, got: &str, choices: &str) -> CliError {
    CliError::Usage(format!("unknown {what} {got:?}, expected {choices}"))
}

pub fn parse_features(s: &str) -> Result<FeatureChannels> {
    FeatureChannels::parse(s).ok_or_else(|| usage_choice("feature set", s, "curv|dist|both"))
}

pub fn parse_cls(s: &str) -> Result<ClsMode> {
    ClsMode::parse(s).ok_or_else(|| usage_choice("CLS wiring", s, "directed|undirected"))
}

pub fn parse_attention(s: &str) -> Result<AttentionKind> {
    AttentionKind::parse(s).ok_or_else(|| usage_choice("attention kind", s, "static|dynamic"))
}

pub fn parse_head_merge(s: &str) -> Result<HeadMerge> {
    HeadMerge::parse(s).ok_or_else(|| usage_choice("head merge", s, "max|mean|concat"))
}

pub fn parse_score_merge(s: &str) -> Result<ScoreMerge> {
    ScoreMerge::parse(s).ok_or_else(|| usage_choice("rollout head merge", s, "mean|max"))
}

pub fn parse_bool(s: &str) -> Result<bool> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(usage_choice("boolean", other, "true|false")),
    }
}

pub fn parse_count(s: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| CliError::Usage(format!("expected a positive integer, got {s:?}")))
}

/// Split a comma-separated flag value and parse each element.
pub fn parse_list<T>(s: &str, parse: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    let items: Vec<&str> = s.split(',').map(str::trim).filter(|p| !p.is_empty()).collect();
    if items.is_empty() {
        return Err(CliError::Usage(format!("empty list {s:?}")));
    }
    items.into_iter().map(|p| parse(p)).collect()
}
