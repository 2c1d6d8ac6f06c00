//! Ops over contiguous edge segments (edges sorted by target node) plus the
//! attention-head pooling and fused edge-score kernels.

use std::rc::Rc;

use crate::error::{Result, TensorError};
use crate::nn_ops::leaky_relu_scalar;
use crate::ops::shape_err;
use crate::tape::{BackFn, Tape, Var};
use crate::tensor::Tensor;

/// Partition of a contiguous edge range into per-target segments.
/// `offsets` has one entry per segment plus a trailing total.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segments {
    offsets: Vec<usize>,
}

impl Segments {
    pub fn from_offsets(offsets: Vec<usize>) -> Result<Self> {
        if offsets.is_empty() || offsets[0] != 0 || offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(TensorError::InvalidArg {
                op: "Segments::from_offsets",
                detail: "offsets must start at 0 and be non-decreasing".into(),
            });
        }
        Ok(Self { offsets })
    }

    /// Build segments from edge targets sorted ascending. Every target id must
    /// be below `n_segments`; targets absent from the list get empty segments.
    pub fn from_sorted_targets(targets: &[u32], n_segments: usize) -> Result<Self> {
        if targets.windows(2).any(|w| w[0] > w[1]) {
            return Err(TensorError::InvalidArg {
                op: "Segments::from_sorted_targets",
                detail: "targets must be sorted ascending".into(),
            });
        }
        if let Some(&last) = targets.last() {
            if last as usize >= n_segments {
                return Err(TensorError::InvalidArg {
                    op: "Segments::from_sorted_targets",
                    detail: format!("target {} exceeds {} segments", last, n_segments),
                });
            }
        }
        let mut offsets = Vec::with_capacity(n_segments + 1);
        offsets.push(0);
        let mut e = 0;
        for seg in 0..n_segments {
            while e < targets.len() && targets[e] as usize == seg {
                e += 1;
            }
            offsets.push(e);
        }
        Ok(Self { offsets })
    }

    pub fn n_segments(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn n_items(&self) -> usize {
        *self.offsets.last().expect("non-empty offsets")
    }

    pub fn range(&self, seg: usize) -> std::ops::Range<usize> {
        self.offsets[seg]..self.offsets[seg + 1]
    }
}

impl Tape {
    /// Numerically stable softmax within each segment.
    pub fn segment_softmax(&mut self, scores: Var, segs: Rc<Segments>) -> Result<Var> {
        let ts = self.value(scores);
        if ts.len() != segs.n_items() {
            return Err(shape_err(
                "segment_softmax",
                format!("{} scores vs {} segment items", ts.len(), segs.n_items()),
            ));
        }
        let mut out = ts.clone();
        for seg in 0..segs.n_segments() {
            let range = segs.range(seg);
            if range.is_empty() {
                return Err(TensorError::EmptySegment { index: seg });
            }
            let slice = &mut out.data_mut()[range];
            let max = slice.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for v in slice.iter_mut() {
                *v = (*v - max).exp();
                sum += *v;
            }
            for v in slice.iter_mut() {
                *v /= sum;
            }
        }
        let si = scores.0;
        let segs_b = Rc::clone(&segs);
        let out_id = self.next_id();
        let back: BackFn = Box::new(move |ctx| {
            let w = ctx.value(out_id);
            let g = ctx.grad;
            let mut ds = g.clone();
            for seg in 0..segs_b.n_segments() {
                let range = segs_b.range(seg);
                let dot: f64 =
                    range.clone().map(|e| g.data()[e] * w.data()[e]).sum();
                for e in range {
                    ds.data_mut()[e] = w.data()[e] * (g.data()[e] - dot);
                }
            }
            vec![(si, ds)]
        });
        self.push("segment_softmax", out, Some(back))
    }

    /// out[t] = sum over the segment of weights[e] * values[e]. Targets with
    /// no items produce zero rows.
    pub fn scatter_weighted_sum(
        &mut self,
        values: Var,
        weights: Var,
        segs: Rc<Segments>,
    ) -> Result<Var> {
        let (tv, tw) = (self.value(values), self.value(weights));
        if tv.rank() != 2 || tv.rows() != segs.n_items() || tw.len() != segs.n_items() {
            return Err(shape_err(
                "scatter_weighted_sum",
                format!(
                    "values {:?}, weights {:?}, {} segment items",
                    tv.shape(),
                    tw.shape(),
                    segs.n_items()
                ),
            ));
        }
        let f = tv.cols();
        let n = segs.n_segments();
        let mut out = Tensor::zeros(&[n, f]);
        for seg in 0..n {
            for e in segs.range(seg) {
                let w = tw.data()[e];
                let row = tv.row(e);
                for (o, v) in out.row_mut(seg).iter_mut().zip(row) {
                    *o += w * v;
                }
            }
        }
        let (vi, wi) = (values.0, weights.0);
        let segs_b = Rc::clone(&segs);
        let back: BackFn = Box::new(move |ctx| {
            let (vv, vw) = (ctx.value(vi), ctx.value(wi));
            let g = ctx.grad;
            let e_total = segs_b.n_items();
            let mut dv = Tensor::zeros(&[e_total, f]);
            let mut dw = vec![0.0; e_total];
            for seg in 0..segs_b.n_segments() {
                let grow = g.row(seg);
                for e in segs_b.range(seg) {
                    let w = vw.data()[e];
                    let vrow = vv.row(e);
                    let drow = dv.row_mut(e);
                    let mut dot = 0.0;
                    for c in 0..f {
                        drow[c] = w * grow[c];
                        dot += vrow[c] * grow[c];
                    }
                    dw[e] = dot;
                }
            }
            vec![(vi, dv), (wi, Tensor::vector(dw))]
        });
        self.push("scatter_weighted_sum", out, Some(back))
    }

    /// Fused gather + scatter: out[t] = sum over segment of
    /// weights[e] * values[src[e]]. Avoids materializing per-edge rows.
    pub fn scatter_weighted_rows(
        &mut self,
        values: Var,
        src: Rc<Vec<u32>>,
        weights: Var,
        segs: Rc<Segments>,
    ) -> Result<Var> {
        let (tv, tw) = (self.value(values), self.value(weights));
        if tv.rank() != 2 || tw.len() != segs.n_items() || src.len() != segs.n_items() {
            return Err(shape_err(
                "scatter_weighted_rows",
                format!(
                    "values {:?}, weights {:?}, {} sources, {} segment items",
                    tv.shape(),
                    tw.shape(),
                    src.len(),
                    segs.n_items()
                ),
            ));
        }
        let n_rows = tv.rows();
        if let Some(&bad) = src.iter().find(|&&s| s as usize >= n_rows) {
            return Err(TensorError::InvalidArg {
                op: "scatter_weighted_rows",
                detail: format!("source row {} out of {}", bad, n_rows),
            });
        }
        let f = tv.cols();
        let n = segs.n_segments();
        let mut out = Tensor::zeros(&[n, f]);
        for seg in 0..n {
            for e in segs.range(seg) {
                let w = tw.data()[e];
                let row = tv.row(src[e] as usize);
                for (o, v) in out.row_mut(seg).iter_mut().zip(row) {
                    *o += w * v;
                }
            }
        }
        let (vi, wi) = (values.0, weights.0);
        let (segs_b, src_b) = (Rc::clone(&segs), Rc::clone(&src));
        let back: BackFn = Box::new(move |ctx| {
            let (vv, vw) = (ctx.value(vi), ctx.value(wi));
            let g = ctx.grad;
            let mut dv = Tensor::zeros(&[n_rows, f]);
            let mut dw = vec![0.0; segs_b.n_items()];
            for seg in 0..segs_b.n_segments() {
                let grow = g.row(seg);
                for e in segs_b.range(seg) {
                    let s = src_b[e] as usize;
                    let w = vw.data()[e];
                    let vrow = vv.row(s);
                    let drow = dv.row_mut(s);
                    let mut dot = 0.0;
                    for c in 0..f {
                        drow[c] += w * grow[c];
                        dot += vrow[c] * grow[c];
                    }
                    dw[e] = dot;
                }
            }
            vec![(vi, dv), (wi, Tensor::vector(dw))]
        });
        self.push("scatter_weighted_rows", out, Some(back))
    }

    /// Mean of the rows inside each segment of a node partition.
    pub fn segment_mean_rows(&mut self, x: Var, segs: Rc<Segments>) -> Result<Var> {
        let tx = self.value(x);
        if tx.rank() != 2 || tx.rows() != segs.n_items() {
            return Err(shape_err(
                "segment_mean_rows",
                format!("{:?} rows vs {} segment items", tx.shape(), segs.n_items()),
            ));
        }
        let f = tx.cols();
        let n = segs.n_segments();
        let mut out = Tensor::zeros(&[n, f]);
        for seg in 0..n {
            let range = segs.range(seg);
            if range.is_empty() {
                return Err(TensorError::EmptySegment { index: seg });
            }
            let inv = 1.0 / range.len() as f64;
            for r in range {
                let row = tx.row(r);
                for (o, v) in out.row_mut(seg).iter_mut().zip(row) {
                    *o += inv * v;
                }
            }
        }
        let xi = x.0;
        let segs_b = Rc::clone(&segs);
        let back: BackFn = Box::new(move |ctx| {
            let g = ctx.grad;
            let mut dx = Tensor::zeros(&[segs_b.n_items(), f]);
            for seg in 0..segs_b.n_segments() {
                let range = segs_b.range(seg);
                let inv = 1.0 / range.len() as f64;
                let grow = g.row(seg);
                for r in range {
                    for (d, gv) in dx.row_mut(r).iter_mut().zip(grow) {
                        *d += inv * gv;
                    }
                }
            }
            vec![(xi, dx)]
        });
        self.push("segment_mean_rows", out, Some(back))
    }

    /// Elementwise max across equally shaped head matrices; gradient routes
    /// to the argmax head, ties toward the lowest head index.
    pub fn head_max_pool(&mut self, heads: &[Var]) -> Result<Var> {
        if heads.is_empty() {
            return Err(TensorError::InvalidArg {
                op: "head_max_pool",
                detail: "need at least one head".into(),
            });
        }
        let shape = self.value(heads[0]).shape().to_vec();
        for &h in heads.iter().skip(1) {
            if self.value(h).shape() != shape.as_slice() {
                return Err(shape_err(
                    "head_max_pool",
                    format!("{:?} vs {:?}", self.value(h).shape(), shape),
                ));
            }
        }
        if heads.len() == 1 {
            return Ok(heads[0]);
        }
        if heads.len() > u8::MAX as usize {
            return Err(TensorError::InvalidArg {
                op: "head_max_pool",
                detail: format!("{} heads exceed the supported 255", heads.len()),
            });
        }
        let mut out = self.value(heads[0]).clone();
        let mut argmax = vec![0u8; out.len()];
        for (k, &h) in heads.iter().enumerate().skip(1) {
            let data = self.value(h).data();
            for i in 0..out.len() {
                if data[i] > out.data()[i] {
                    out.data_mut()[i] = data[i];
                    argmax[i] = k as u8;
                }
            }
        }
        let ids: Vec<usize> = heads.iter().map(|v| v.0).collect();
        let argmax = Rc::new(argmax);
        let shape_b = shape.clone();
        let back: BackFn = Box::new(move |ctx| {
            let g = ctx.grad;
            let mut outs: Vec<Tensor> =
                ids.iter().map(|_| Tensor::zeros(&shape_b)).collect();
            for i in 0..g.len() {
                outs[argmax[i] as usize].data_mut()[i] = g.data()[i];
            }
            ids.iter().zip(outs).map(|(&id, t)| (id, t)).collect()
        });
        self.push("head_max_pool", out, Some(back))
    }

    /// Fused attention-score kernel:
    /// score[e] = att . leaky_relu(q[src[e]] + k[dst[e]] + bias, slope).
    /// The per-edge pre-activations are recomputed in backward instead of
    /// being stored, keeping memory at O(E) rather than O(E*F).
    pub fn attention_edge_scores(
        &mut self,
        q: Var,
        k: Var,
        att: Var,
        bias: Option<Var>,
        src: Rc<Vec<u32>>,
        dst: Rc<Vec<u32>>,
        slope: f64,
    ) -> Result<Var> {
        let (tq, tk, ta) = (self.value(q), self.value(k), self.value(att));
        let f = tq.cols();
        if tk.cols() != f || ta.len() != f || tq.rows() != tk.rows() {
            return Err(shape_err(
                "attention_edge_scores",
                format!("q {:?}, k {:?}, att {:?}", tq.shape(), tk.shape(), ta.shape()),
            ));
        }
        if src.len() != dst.len() {
            return Err(shape_err(
                "attention_edge_scores",
                format!("{} sources vs {} targets", src.len(), dst.len()),
            ));
        }
        let n = tq.rows();
        if let Some(&bad) = src.iter().chain(dst.iter()).find(|&&i| i as usize >= n) {
            return Err(TensorError::InvalidArg {
                op: "attention_edge_scores",
                detail: format!("node index {} out of {}", bad, n),
            });
        }
        let bias_data: Option<Vec<f64>> = match bias {
            Some(b) => {
                let tb = self.value(b);
                if tb.len() != f {
                    return Err(shape_err(
                        "attention_edge_scores",
                        format!("bias len {} vs {} features", tb.len(), f),
                    ));
                }
                Some(tb.data().to_vec())
            }
            None => None,
        };
        let e_total = src.len();
        let mut scores = vec![0.0; e_total];
        {
            let (qd, kd, ad) = (tq.data(), tk.data(), ta.data());
            for e in 0..e_total {
                let qrow = &qd[src[e] as usize * f..src[e] as usize * f + f];
                let krow = &kd[dst[e] as usize * f..dst[e] as usize * f + f];
                let mut acc = 0.0;
                match &bias_data {
                    Some(bd) => {
                        for c in 0..f {
                            acc += ad[c] * leaky_relu_scalar(qrow[c] + krow[c] + bd[c], slope);
                        }
                    }
                    None => {
                        for c in 0..f {
                            acc += ad[c] * leaky_relu_scalar(qrow[c] + krow[c], slope);
                        }
                    }
                }
                scores[e] = acc;
            }
        }
        let (qi, ki, ai) = (q.0, k.0, att.0);
        let bias_id = bias.map(|b| b.0);
        let (src_b, dst_b) = (Rc::clone(&src), Rc::clone(&dst));
        let back: BackFn = Box::new(move |ctx| {
            let (vq, vk, va) = (ctx.value(qi), ctx.value(ki), ctx.value(ai));
            let vb: Option<&[f64]> = bias_id.map(|bi| ctx.value(bi).data());
            let g = ctx.grad.data();
            let mut dq = Tensor::zeros(&[n, f]);
            let mut dk = Tensor::zeros(&[n, f]);
            let mut da = vec![0.0; f];
            let mut db = vec![0.0; f];
            let (qd, kd, ad) = (vq.data(), vk.data(), va.data());
            for e in 0..src_b.len() {
                let ge = g[e];
                if ge == 0.0 {
                    continue;
                }
                let s = src_b[e] as usize;
                let t = dst_b[e] as usize;
                let qrow = &qd[s * f..s * f + f];
                let krow = &kd[t * f..t * f + f];
                let dqrow = dq.row_mut(s);
                let dkrow = dk.row_mut(t);
                for c in 0..f {
                    let mut z = qrow[c] + krow[c];
                    if let Some(bd) = vb {
                        z += bd[c];
                    }
                    let slope_here = if z > 0.0 { 1.0 } else { slope };
                    let dz = ge * ad[c] * slope_here;
                    dqrow[c] += dz;
                    dkrow[c] += dz;
                    db[c] += dz;
                    da[c] += ge * leaky_relu_scalar(z, slope);
                }
            }
            let mut grads = vec![
                (qi, dq),
                (ki, dk),
                (ai, Tensor::vector(da)),
            ];
            if let Some(bi) = bias_id {
                grads.push((bi, Tensor::vector(db)));
            }
            grads
        });
        self.push("attention_edge_scores", Tensor::vector(scores), Some(back))
    }
}
