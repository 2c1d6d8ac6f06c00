//! Attention-based explanations for graph classifiers: per-block attention
//! matrices, the rollout recursion that composes them across layers, CLS
//! score extraction, and display clipping for mesh visualization.

mod clip;
mod matrix;
mod rollout;
mod sidecar;

use thiserror::Error;

pub use clip::{clip_for_display, ClippedScores};
pub use matrix::{build_attention_matrix, ScoreMerge, SparseMatrix};
pub use rollout::{attention_rollout, cls_scores, rollout_for_sample, RolloutResult};
pub use sidecar::Sidecar;

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("attention record does not match the graph: {detail}")]
    InconsistentEdges { detail: String },
    #[error("matrix sizes disagree: {a} vs {b}")]
    DimensionMismatch { a: usize, b: usize },
    #[error("rollout needs at least one attention matrix")]
    EmptyRollout,
}

pub type Result<T> = std::result::Result<T, ExplainError>;
