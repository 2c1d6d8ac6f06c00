//! Sparse square matrices in compressed-row form, sized for one sample's
//! augmented graph (mesh nodes plus the trailing CLS node).

use cgat_model::AttentionRecord;

use crate::{ExplainError, Result};

/// How the per-head attention weights of one edge collapse to a single
/// number. Independent of the merge the model uses on feature vectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScoreMerge {
    Mean,
    Max,
}

impl ScoreMerge {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Mean => "mean",
            Self::Max => "max",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mean" => Some(Self::Mean),
            "max" => Some(Self::Max),
            _ => None,
        }
    }
}

/// Compressed-sparse-row square matrix. Column indices are sorted within
/// each row and hold at most one entry per (row, column) pair.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    /// Build from (row, column, value) triplets. Duplicate coordinates sum.
    pub fn from_triplets(n: usize, triplets: &[(u32, u32, f64)]) -> Result<Self> {
        let mut sorted = triplets.to_vec();
        for &(r, c, _) in &sorted {
            if r as usize >= n || c as usize >= n {
                return Err(ExplainError::InconsistentEdges {
                    detail: format!("entry ({r}, {c}) outside a {n}x{n} matrix"),
                });
            }
        }
        sorted.sort_by_key(|&(r, c, _)| (r, c));
        let mut merged: Vec<(u32, u32, f64)> = Vec::with_capacity(sorted.len());
        for &(r, c, v) in &sorted {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        let mut row_ptr = vec![0usize; n + 1];
        for &(r, _, _) in &merged {
            row_ptr[r as usize + 1] += 1;
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        let cols = merged.iter().map(|e| e.1).collect();
        let vals = merged.iter().map(|e| e.2).collect();
        Ok(Self { n, row_ptr, cols, vals })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            row_ptr: (0..=n).collect(),
            cols: (0..n as u32).collect(),
            vals: vec![1.0; n],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Entries of one row as (column, value) pairs, columns ascending.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()]
            .iter()
            .zip(&self.vals[span])
            .map(|(&c, &v)| (c as usize, v))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(col, _)| col == c).map_or(0.0, |(_, v)| v)
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut dense = vec![0.0; self.n * self.n];
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                dense[r * self.n + c] = v;
            }
        }
        dense
    }

    /// Self plus the identity, merging with any existing diagonal entries.
    pub fn plus_identity(&self) -> Self {
        let mut triplets: Vec<(u32, u32, f64)> = Vec::with_capacity(self.nnz() + self.n);
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                triplets.push((r as u32, c as u32, v));
            }
            triplets.push((r as u32, r as u32, 1.0));
        }
        Self::from_triplets(self.n, &triplets).expect("indices already validated")
    }

    /// Scale each row to sum 1. Rows that sum to zero are left untouched.
    pub fn row_normalized(&self) -> Self {
        let mut out = self.clone();
        for r in 0..self.n {
            let span = out.row_ptr[r]..out.row_ptr[r + 1];
            let sum: f64 = out.vals[span.clone()].iter().sum();
            if sum != 0.0 {
                for v in &mut out.vals[span] {
                    *v /= sum;
                }
            }
        }
        out
    }

    /// Sparse product self * rhs using a dense per-row accumulator.
    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.n != rhs.n {
            return Err(ExplainError::DimensionMismatch { a: self.n, b: rhs.n });
        }
        let n = self.n;
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols: Vec<u32> = Vec::new();
        let mut vals: Vec<f64> = Vec::new();
        let mut acc = vec![0.0f64; n];
        let mut seen = vec![false; n];
        let mut touched: Vec<u32> = Vec::with_capacity(n);
        for r in 0..n {
            for (k, v) in self.row(r) {
                for (c, w) in rhs.row(k) {
                    if !seen[c] {
                        seen[c] = true;
                        touched.push(c as u32);
                    }
                    acc[c] += v * w;
                }
            }
            touched.sort_unstable();
            for &c in &touched {
                cols.push(c);
                vals.push(acc[c as usize]);
                acc[c as usize] = 0.0;
                seen[c as usize] = false;
            }
            touched.clear();
            row_ptr[r + 1] = cols.len();
        }
        Ok(Self { n, row_ptr, cols, vals })
    }
}

/// Merge one block's per-head attention weights into a single sparse matrix
/// with entry (target, source) per edge. `edges` must be the (source, target)
/// pairs of the augmented sample, aligned index-for-index with the record.
pub fn build_attention_matrix(
    record: &AttentionRecord,
    edges: &[(u32, u32)],
    n_nodes: usize,
    merge: ScoreMerge,
) -> Result<SparseMatrix> {
    if record.per_head.is_empty() {
        return Err(ExplainError::InconsistentEdges {
            detail: format!("block {} carries no attention heads", record.block),
        });
    }
    for head in &record.per_head {
        if head.len() != edges.len() {
            return Err(ExplainError::InconsistentEdges {
                detail: format!(
                    "block {}: {} weights for {} edges",
                    record.block,
                    head.len(),
                    edges.len()
                ),
            });
        }
    }
    let k = record.per_head.len() as f64;
    let mut triplets = Vec::with_capacity(edges.len());
    for (e, &(src, dst)) in edges.iter().enumerate() {
        let merged = match merge {
            ScoreMerge::Mean => record.per_head.iter().map(|h| h[e]).sum::<f64>() / k,
            ScoreMerge::Max => record
                .per_head
                .iter()
                .map(|h| h[e])
                .fold(f64::NEG_INFINITY, f64::max),
        };
        triplets.push((dst, src, merged));
    }
    SparseMatrix::from_triplets(n_nodes, &triplets)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_round_trip_through_dense() {
        let m = SparseMatrix::from_triplets(3, &[(0, 2, 5.0), (2, 0, 1.0), (0, 0, 2.0)]).unwrap();
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(0, 2), 5.0);
        assert_eq!(m.get(0, 0), 2.0);
        assert_eq!(m.get(2, 0), 1.0);
        assert_eq!(m.get(1, 1), 0.0);
        assert_eq!(m.to_dense(), vec![2.0, 0.0, 5.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn duplicate_triplets_accumulate() {
        let m = SparseMatrix::from_triplets(2, &[(0, 1, 1.5), (0, 1, 2.5)]).unwrap();
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, 1), 4.0);
    }

    #[test]
    fn out_of_range_triplets_are_rejected() {
        assert!(matches!(
            SparseMatrix::from_triplets(2, &[(0, 2, 1.0)]),
            Err(ExplainError::InconsistentEdges { .. })
        ));
    }

    #[test]
    fn plus_identity_merges_existing_diagonal() {
        let m = SparseMatrix::from_triplets(2, &[(0, 0, 0.25), (1, 0, 1.0)]).unwrap();
        let p = m.plus_identity();
        assert_eq!(p.get(0, 0), 1.25);
        assert_eq!(p.get(1, 1), 1.0);
        assert_eq!(p.get(1, 0), 1.0);
        assert_eq!(p.nnz(), 3);
    }

    #[test]
    fn row_normalization_ignores_empty_rows() {
        let m = SparseMatrix::from_triplets(3, &[(0, 0, 1.0), (0, 1, 3.0)]).unwrap();
        let norm = m.row_normalized();
        assert_eq!(norm.get(0, 0), 0.25);
        assert_eq!(norm.get(0, 1), 0.75);
        assert_eq!(norm.row(1).count(), 0, "an all-zero row must stay empty");
    }

    #[test]
    fn sparse_product_matches_hand_computation() {
        let a = SparseMatrix::from_triplets(2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 1, 3.0)]).unwrap();
        let b = SparseMatrix::from_triplets(2, &[(0, 1, 4.0), (1, 0, 5.0), (1, 1, 6.0)]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.to_dense(), vec![10.0, 16.0, 15.0, 18.0]);
        assert!(matches!(
            a.matmul(&SparseMatrix::identity(3)),
            Err(ExplainError::DimensionMismatch { a: 2, b: 3 })
        ));
    }

    #[test]
    fn single_head_merge_is_identity_on_weights() {
        let record = AttentionRecord { block: 0, per_head: vec![vec![0.3, 0.7]] };
        let edges = vec![(0u32, 1u32), (1, 1)];
        for merge in [ScoreMerge::Mean, ScoreMerge::Max] {
            let m = build_attention_matrix(&record, &edges, 2, merge).unwrap();
            assert_eq!(m.get(1, 0), 0.3, "entry is (target, source)");
            assert_eq!(m.get(1, 1), 0.7);
        }
    }

    #[test]
    fn head_merge_mean_and_max_differ_as_expected() {
        let record = AttentionRecord { block: 0, per_head: vec![vec![0.2], vec![0.8]] };
        let edges = vec![(0u32, 1u32)];
        let mean = build_attention_matrix(&record, &edges, 2, ScoreMerge::Mean).unwrap();
        let max = build_attention_matrix(&record, &edges, 2, ScoreMerge::Max).unwrap();
        assert!((mean.get(1, 0) - 0.5).abs() < 1e-15);
        assert_eq!(max.get(1, 0), 0.8);
    }

    #[test]
    fn mismatched_record_lengths_are_rejected() {
        let record = AttentionRecord { block: 1, per_head: vec![vec![0.5]] };
        let edges = vec![(0u32, 1u32), (1, 0)];
        assert!(matches!(
            build_attention_matrix(&record, &edges, 2, ScoreMerge::Mean),
            Err(ExplainError::InconsistentEdges { .. })
        ));
    }
}
