//! Provenance sidecar written next to every exported explanation mesh.

use crate::matrix::ScoreMerge;

/// Everything a reader needs to interpret an exported score mesh: the
/// shared clip bounds, how heads were merged, whether rollout factors were
/// renormalized, and which checkpoint produced the attention.
#[derive(Clone, Debug, PartialEq)]
pub struct Sidecar {
    pub lo: f64,
    pub hi: f64,
    pub head_merge: ScoreMerge,
    pub renormalize: bool,
    pub checkpoint_sha256: String,
}

impl Sidecar {
    pub fn to_text(&self) -> String {
        format!(
            "clip_lo\t{:.17e}\nclip_hi\t{:.17e}\nhead_merge\t{}\nrenormalize\t{}\ncheckpoint_sha256\t{}\n",
            self.lo,
            self.hi,
            self.head_merge.name(),
            self.renormalize,
            self.checkpoint_sha256
        )
    }

    pub fn parse(text: &str) -> Option<Self> {
        let mut lo = None;
        let mut hi = None;
        let mut head_merge = None;
        let mut renormalize = None;
        let mut checkpoint = None;
        for line in text.lines() {
            let (key, value) = line.split_once('\t')?;
            match key {
                "clip_lo" => lo = Some(value.parse().ok()?),
                "clip_hi" => hi = Some(value.parse().ok()?),
                "head_merge" => head_merge = Some(ScoreMerge::parse(value)?),
                "renormalize" => renormalize = Some(value.parse().ok()?),
                "checkpoint_sha256" => checkpoint = Some(value.to_string()),
                _ => return None,
            }
        }
        Some(Self {
            lo: lo?,
            hi: hi?,
            head_merge: head_merge?,
            renormalize: renormalize?,
            checkpoint_sha256: checkpoint?,
        })
    }
}
