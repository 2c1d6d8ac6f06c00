//! Structural tape ops: arithmetic, matrix products, and row plumbing.

use std::rc::Rc;

use crate::error::{Result, TensorError};
use crate::tape::{BackFn, Tape, Var};
use crate::tensor::{matmul, matmul_nt, matmul_tn, Tensor};

impl Tape {
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err("add", format!("{:?} vs {:?}", ta.shape(), tb.shape())));
        }
        let out = ta.zip_map(tb, |x, y| x + y);
        let (ai, bi) = (a.0, b.0);
        let back: BackFn = Box::new(move |ctx| vec![(ai, ctx.grad.clone()), (bi, ctx.grad.clone())]);
        self.push("add", out, Some(back))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let out = self.value(a).map(|x| c * x);
        let ai = a.0;
        let back: BackFn = Box::new(move |ctx| vec![(ai, ctx.grad.map(|g| c * g))]);
        self.push("scale", out, Some(back))
    }

    /// View the same coefficients under a new shape.
    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let t = self.value(a);
        if shape.iter().product::<usize>() != t.len() {
            return Err(shape_err(
                "reshape",
                format!("{:?} cannot view {} values", shape, t.len()),
            ));
        }
        let old_shape = t.shape().to_vec();
        let out = Tensor::new(shape, t.data().to_vec())?;
        let ai = a.0;
        let back: BackFn = Box::new(move |ctx| {
            let g = Tensor::new(&old_shape, ctx.grad.data().to_vec()).expect("same length");
            vec![(ai, g)]
        });
        self.push("reshape", out, Some(back))
    }

    /// Sum of all entries, as a scalar.
    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let out = Tensor::scalar(t.data().iter().sum());
        let shape = t.shape().to_vec();
        let ai = a.0;
        let back: BackFn = Box::new(move |ctx| {
            let g = ctx.grad.item();
            vec![(ai, Tensor::filled(&shape, g))]
        });
        self.push("sum", out, Some(back))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.rank() != 2 || tb.rank() != 2 || ta.cols() != tb.rows() {
            return Err(shape_err("matmul", format!("{:?} x {:?}", ta.shape(), tb.shape())));
        }
        let out = matmul(ta, tb);
        let (ai, bi) = (a.0, b.0);
        let back: BackFn = Box::new(move |ctx| {
            let (va, vb) = (ctx.value(ai), ctx.value(bi));
            vec![(ai, matmul_nt(ctx.grad, vb)), (bi, matmul_tn(va, ctx.grad))]
        });
        self.push("matmul", out, Some(back))
    }

    /// y = x * w + bias, bias broadcast over rows.
    pub fn linear(&mut self, x: Var, w: Var, bias: Option<Var>) -> Result<Var> {
        let (tx, tw) = (self.value(x), self.value(w));
        if tx.rank() != 2 || tw.rank() != 2 || tx.cols() != tw.rows() {
            return Err(shape_err("linear", format!("{:?} x {:?}", tx.shape(), tw.shape())));
        }
        let mut out = matmul(tx, tw);
        if let Some(b) = bias {
            let tb = self.value(b);
            if tb.len() != tw.cols() {
                return Err(shape_err(
                    "linear",
                    format!("bias len {} vs {} columns", tb.len(), tw.cols()),
                ));
            }
            let bd = tb.data().to_vec();
            for r in 0..out.rows() {
                for (o, bv) in out.row_mut(r).iter_mut().zip(&bd) {
                    *o += bv;
                }
            }
        }
        let (xi, wi) = (x.0, w.0);
        let bias_id = bias.map(|b| b.0);
        let back: BackFn = Box::new(move |ctx| {
            let (vx, vw) = (ctx.value(xi), ctx.value(wi));
            let mut grads = vec![(xi, matmul_nt(ctx.grad, vw)), (wi, matmul_tn(vx, ctx.grad))];
            if let Some(bi) = bias_id {
                let g = ctx.grad;
                let cols = g.cols();
                let mut db = vec![0.0; cols];
                for r in 0..g.rows() {
                    for (acc, gv) in db.iter_mut().zip(g.row(r)) {
                        *acc += gv;
                    }
                }
                grads.push((bi, Tensor::vector(db)));
            }
            grads
        });
        self.push("linear", out, Some(back))
    }

    /// out[i] = x[idx[i]] as rows; duplicate indices are allowed.
    pub fn gather_rows(&mut self, x: Var, idx: Rc<Vec<u32>>) -> Result<Var> {
        let tx = self.value(x);
        let (n, c) = (tx.rows(), tx.cols());
        if let Some(&bad) = idx.iter().find(|&&i| i as usize >= n) {
            return Err(TensorError::InvalidArg {
                op: "gather_rows",
                detail: format!("row index {} out of {} rows", bad, n),
            });
        }
        let mut out = Tensor::zeros(&[idx.len(), c]);
        for (r, &i) in idx.iter().enumerate() {
            out.row_mut(r).copy_from_slice(tx.row(i as usize));
        }
        let xi = x.0;
        let idx_b = Rc::clone(&idx);
        let back: BackFn = Box::new(move |ctx| {
            let mut dx = Tensor::zeros(&[n, c]);
            for (r, &i) in idx_b.iter().enumerate() {
                let row = ctx.grad.row(r);
                for (d, gv) in dx.row_mut(i as usize).iter_mut().zip(row) {
                    *d += gv;
                }
            }
            vec![(xi, dx)]
        });
        self.push("gather_rows", out, Some(back))
    }

    /// Stack the rows of `a` on top of the rows of `b`.
    pub fn concat_rows(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.rank() != 2 || tb.rank() != 2 || ta.cols() != tb.cols() {
            return Err(shape_err("concat_rows", format!("{:?} vs {:?}", ta.shape(), tb.shape())));
        }
        let (na, nb, c) = (ta.rows(), tb.rows(), ta.cols());
        let mut data = Vec::with_capacity((na + nb) * c);
        data.extend_from_slice(ta.data());
        data.extend_from_slice(tb.data());
        let out = Tensor::new(&[na + nb, c], data)?;
        let (ai, bi) = (a.0, b.0);
        let back: BackFn = Box::new(move |ctx| {
            let g = ctx.grad;
            let ga = Tensor::new(&[na, c], g.data()[..na * c].to_vec()).expect("split");
            let gb = Tensor::new(&[nb, c], g.data()[na * c..].to_vec()).expect("split");
            vec![(ai, ga), (bi, gb)]
        });
        self.push("concat_rows", out, Some(back))
    }

    /// Join matrices with equal row counts side by side.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(TensorError::InvalidArg {
                op: "concat_cols",
                detail: "need at least one part".into(),
            });
        }
        let n = self.value(parts[0]).rows();
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let t = self.value(p);
            if t.rank() != 2 || t.rows() != n {
                return Err(shape_err(
                    "concat_cols",
                    format!("{:?} vs {} rows", t.shape(), n),
                ));
            }
            widths.push(t.cols());
        }
        if parts.len() == 1 {
            return Ok(parts[0]);
        }
        let total: usize = widths.iter().sum();
        let mut out = Tensor::zeros(&[n, total]);
        let mut col = 0;
        for (&p, &w) in parts.iter().zip(&widths) {
            let t = self.value(p).clone();
            for r in 0..n {
                out.row_mut(r)[col..col + w].copy_from_slice(t.row(r));
            }
            col += w;
        }
        let ids: Vec<usize> = parts.iter().map(|v| v.0).collect();
        let widths_b = widths.clone();
        let back: BackFn = Box::new(move |ctx| {
            let g = ctx.grad;
            let mut col = 0;
            let mut grads = Vec::with_capacity(ids.len());
            for (&id, &w) in ids.iter().zip(&widths_b) {
                let mut part = Tensor::zeros(&[n, w]);
                for r in 0..n {
                    part.row_mut(r).copy_from_slice(&g.row(r)[col..col + w]);
                }
                grads.push((id, part));
                col += w;
            }
            grads
        });
        self.push("concat_cols", out, Some(back))
    }

    /// Tile a single row `times` times.
    pub fn repeat_row(&mut self, x: Var, times: usize) -> Result<Var> {
        let tx = self.value(x);
        if tx.rank() != 2 || tx.rows() != 1 {
            return Err(shape_err("repeat_row", format!("want 1xC, got {:?}", tx.shape())));
        }
        let c = tx.cols();
        let mut data = Vec::with_capacity(times * c);
        for _ in 0..times {
            data.extend_from_slice(tx.row(0));
        }
        let out = Tensor::new(&[times, c], data)?;
        let xi = x.0;
        let back: BackFn = Box::new(move |ctx| {
            let mut dx = Tensor::zeros(&[1, c]);
            for r in 0..times {
                for (d, gv) in dx.row_mut(0).iter_mut().zip(ctx.grad.row(r)) {
                    *d += gv;
                }
            }
            vec![(xi, dx)]
        });
        self.push("repeat_row", out, Some(back))
    }
}

pub(crate) fn shape_err(op: &'static str, detail: String) -> TensorError {
    TensorError::ShapeMismatch { op, detail }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::param::ParamStore;

    #[test]
    fn linear_identity_input_reproduces_weights() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap());
        let w = tape.leaf(Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let y = tape.linear(x, w, None).unwrap();
        assert_eq!(tape.value(y).data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn linear_zero_weights_yield_bias_rows() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::matrix(3, 2, vec![5.0; 6]).unwrap());
        let w = tape.leaf(Tensor::zeros(&[2, 4]));
        let b = tape.leaf(Tensor::vector(vec![0.5, -1.0, 2.0, 0.0]));
        let y = tape.linear(x, w, Some(b)).unwrap();
        for r in 0..3 {
            assert_eq!(tape.value(y).row(r), &[0.5, -1.0, 2.0, 0.0]);
        }
    }

    #[test]
    fn gather_rows_accumulates_duplicate_grads() {
        let mut tape = Tape::new();
        let mut store = ParamStore::new();
        let id = store.add("x", Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap()).unwrap();
        let x = tape.param(&store, id);
        let picked = tape.gather_rows(x, Rc::new(vec![0, 0, 1])).unwrap();
        let loss = tape.sum(picked).unwrap();
        tape.backward(loss, &mut store).unwrap();
        assert_eq!(store.get(id).grad.data(), &[2.0, 2.0, 1.0, 1.0]);
    }
}
