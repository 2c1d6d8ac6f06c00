use cgat_graph::ClsMode;
use cgat_mesh::FeatureChannels;

use crate::error::{ModelError, Result};

/// Which edge-score formula the attention heads use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AttentionKind {
    /// Score from attention vectors applied to transformed endpoints, with
    /// the nonlinearity outside. The resulting source ranking is the same
    /// for every target node.
    Static,
    /// Score from an attention vector applied after the nonlinearity, so
    /// each target ranks its sources differently.
    Dynamic,
}

impl AttentionKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Static => "static",
            Self::Dynamic => "dynamic",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "static" => Some(Self::Static),
            "dynamic" => Some(Self::Dynamic),
            _ => None,
        }
    }
}

/// How per-head conv outputs become one node embedding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeadMerge {
    Max,
    Mean,
    Concat,
}

impl HeadMerge {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Max => "max",
            Self::Mean => "mean",
            Self::Concat => "concat",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "max" => Some(Self::Max),
            "mean" => Some(Self::Mean),
            "concat" => Some(Self::Concat),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelConfig {
    pub blocks: usize,
    pub heads: usize,
    pub hidden: usize,
    pub features: FeatureChannels,
    pub cls_mode: ClsMode,
    pub attention: AttentionKind,
    pub head_merge: HeadMerge,
    pub classes: usize,
    pub dropout_p: f64,
    pub conv_bias: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            blocks: 6,
            heads: 8,
            hidden: 128,
            features: FeatureChannels::Both,
            cls_mode: ClsMode::Directed,
            attention: AttentionKind::Dynamic,
            head_merge: HeadMerge::Max,
            classes: 5,
            dropout_p: 0.3,
            conv_bias: true,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |detail: String| Err(ModelError::InvalidConfig { detail });
        if self.blocks == 0 || self.blocks > 15 {
            return fail(format!("blocks must be 1..=15, got {}", self.blocks));
        }
        if self.heads == 0 {
            return fail("heads must be >= 1".into());
        }
        if self.hidden == 0 {
            return fail("hidden width must be >= 1".into());
        }
        if self.classes < 2 {
            return fail(format!("need >= 2 classes, got {}", self.classes));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return fail(format!("dropout_p must be in [0, 1), got {}", self.dropout_p));
        }
        if self.head_merge == HeadMerge::Concat && self.hidden % self.heads != 0 {
            return fail(format!(
                "concat merge needs hidden divisible by heads, got {}/{}",
                self.hidden, self.heads
            ));
        }
        Ok(())
    }

    /// Input feature width implied by the channel selection.
    pub fn d_in(&self) -> usize {
        self.features.count()
    }

    /// Output width of one attention head before merging.
    pub fn head_width(&self) -> usize {
        match self.head_merge {
            HeadMerge::Concat => self.hidden / self.heads,
            _ => self.hidden,
        }
    }
}
