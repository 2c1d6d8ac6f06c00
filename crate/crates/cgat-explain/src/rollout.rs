//! Attention rollout: compose per-block attention matrices into one
//! attribution matrix and read off the CLS row.

use cgat_model::AttentionRecord;

use crate::matrix::{build_attention_matrix, ScoreMerge, SparseMatrix};
use crate::{ExplainError, Result};

/// CLS-to-node attribution for one sample, aligned to the sample's node
/// order, with the full rollout matrix kept for callers that need more
/// than the CLS row.
#[derive(Clone, Debug)]
pub struct RolloutResult {
    pub scores: Vec<f64>,
    pub matrix: SparseMatrix,
}

/// Fold the per-block matrices bottom-up: each step left-multiplies the
/// accumulated attribution by (A + I) for the next block. With
/// `renormalize` every factor is scaled to row-sum 1 first, keeping the
/// result row-stochastic; without it the recursion is applied literally
/// and magnitudes grow with depth.
pub fn attention_rollout(matrices: &[SparseMatrix], renormalize: bool) -> Result<SparseMatrix> {
    let first = matrices.first().ok_or(ExplainError::EmptyRollout)?;
    let n = first.size();
    for m in matrices {
        if m.size() != n {
            return Err(ExplainError::DimensionMismatch { a: n, b: m.size() });
        }
    }
    let factor = |m: &SparseMatrix| {
        let with_identity = m.plus_identity();
        if renormalize {
            with_identity.row_normalized()
        } else {
            with_identity
        }
    };
    let mut rolled = factor(first);
    for m in &matrices[1..] {
        rolled = factor(m).matmul(&rolled)?;
    }
    Ok(rolled)
}

/// Read the CLS row out of a rollout matrix, dropping the CLS self-entry.
/// The remaining entries line up with the sample's original node order.
pub fn cls_scores(rollout: &SparseMatrix, cls_index: usize) -> RolloutResult {
    let n = rollout.size();
    let mut scores = vec![0.0; n - 1];
    for (c, v) in rollout.row(cls_index) {
        if c != cls_index {
            scores[if c < cls_index { c } else { c - 1 }] = v;
        }
    }
    RolloutResult { scores, matrix: rollout.clone() }
}

/// Full pipeline for one sample: merge heads per block, roll the blocks up,
/// and extract the CLS row. `edges` and the records must come from a
/// single-sample forward pass; the CLS node sits at index `n_real`.
pub fn rollout_for_sample(
    records: &[AttentionRecord],
    edges: &[(u32, u32)],
    n_real: usize,
    merge: ScoreMerge,
    renormalize: bool,
) -> Result<RolloutResult> {
    let matrices: Vec<SparseMatrix> = records
        .iter()
        .map(|rec| build_attention_matrix(rec, edges, n_real + 1, merge))
        .collect::<Result<_>>()?;
    let rolled = attention_rollout(&matrices, renormalize)?;
    Ok(cls_scores(&rolled, n_real))
}
