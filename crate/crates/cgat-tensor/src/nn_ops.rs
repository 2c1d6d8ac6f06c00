//! Pointwise nonlinearities, layer normalization, dropout, and the
//! classification loss.

use std::rc::Rc;

use rand::Rng;

use crate::error::{Result, TensorError};
use crate::ops::shape_err;
use crate::tape::{BackFn, Tape, Var};
use crate::tensor::Tensor;

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Exact Gaussian-CDF GeLU: x * Phi(x).
pub fn gelu_scalar(x: f64) -> f64 {
    x * 0.5 * (1.0 + libm::erf(x / SQRT_2))
}

/// d/dx GeLU = Phi(x) + x * phi(x).
pub fn gelu_grad_scalar(x: f64) -> f64 {
    let phi_cdf = 0.5 * (1.0 + libm::erf(x / SQRT_2));
    let phi_pdf = INV_SQRT_2PI * (-0.5 * x * x).exp();
    phi_cdf + x * phi_pdf
}

pub fn leaky_relu_scalar(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

impl Tape {
    pub fn gelu(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).map(gelu_scalar);
        let xi = x.0;
        let back: BackFn = Box::new(move |ctx| {
            let vx = ctx.value(xi);
            vec![(xi, ctx.grad.zip_map(vx, |g, v| g * gelu_grad_scalar(v)))]
        });
        self.push("gelu", out, Some(back))
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Result<Var> {
        let out = self.value(x).map(|v| leaky_relu_scalar(v, slope));
        let xi = x.0;
        let back: BackFn = Box::new(move |ctx| {
            let vx = ctx.value(xi);
            vec![(xi, ctx.grad.zip_map(vx, |g, v| if v > 0.0 { g } else { slope * g }))]
        });
        self.push("leaky_relu", out, Some(back))
    }

    /// Per-row standardization with eps inside the square root, then an
    /// affine gain/bias over columns.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Result<Var> {
        let (tx, tg, tb) = (self.value(x), self.value(gain), self.value(bias));
        if tx.rank() != 2 {
            return Err(shape_err("layer_norm", format!("want matrix, got {:?}", tx.shape())));
        }
        let (n, f) = (tx.rows(), tx.cols());
        if tg.len() != f || tb.len() != f {
            return Err(shape_err(
                "layer_norm",
                format!("gain/bias len {}/{} vs {} columns", tg.len(), tb.len(), f),
            ));
        }
        let mut out = Tensor::zeros(&[n, f]);
        let mut inv_std = Vec::with_capacity(n);
        let mut means = Vec::with_capacity(n);
        let (gd, bd) = (tg.data().to_vec(), tb.data().to_vec());
        for r in 0..n {
            let row = tx.row(r);
            let mean = row.iter().sum::<f64>() / f as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / f as f64;
            let is = 1.0 / (var + eps).sqrt();
            means.push(mean);
            inv_std.push(is);
            for c in 0..f {
                out.set2(r, c, (row[c] - mean) * is * gd[c] + bd[c]);
            }
        }
        let (xi, gi, bi) = (x.0, gain.0, bias.0);
        let means = Rc::new(means);
        let inv_std = Rc::new(inv_std);
        let back: BackFn = Box::new(move |ctx| {
            let vx = ctx.value(xi);
            let vg = ctx.value(gi);
            let g = ctx.grad;
            let mut dx = Tensor::zeros(&[n, f]);
            let mut dgain = vec![0.0; f];
            let mut dbias = vec![0.0; f];
            for r in 0..n {
                let row = vx.row(r);
                let grow = g.row(r);
                let (mean, is) = (means[r], inv_std[r]);
                // dy = grad * gain applied to xhat; fold row means per the
                // standard layer-norm gradient.
                let mut mean_dy = 0.0;
                let mut mean_dy_xhat = 0.0;
                for c in 0..f {
                    let xhat = (row[c] - mean) * is;
                    let dy = grow[c] * vg.data()[c];
                    dgain[c] += grow[c] * xhat;
                    dbias[c] += grow[c];
                    mean_dy += dy;
                    mean_dy_xhat += dy * xhat;
                }
                mean_dy /= f as f64;
                mean_dy_xhat /= f as f64;
                for c in 0..f {
                    let xhat = (row[c] - mean) * is;
                    let dy = grow[c] * vg.data()[c];
                    dx.set2(r, c, is * (dy - mean_dy - xhat * mean_dy_xhat));
                }
            }
            vec![(xi, dx), (gi, Tensor::vector(dgain)), (bi, Tensor::vector(dbias))]
        });
        self.push("layer_norm", out, Some(back))
    }

    /// Training: zero entries with probability `p`, scale survivors by
    /// 1/(1-p). Inference: identity.
    pub fn dropout(&mut self, x: Var, p: f64, training: bool, rng: &mut impl Rng) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(TensorError::InvalidArg {
                op: "dropout",
                detail: format!("p must be in [0, 1), got {}", p),
            });
        }
        if !training || p == 0.0 {
            return Ok(x);
        }
        let keep_scale = 1.0 / (1.0 - p);
        let tx = self.value(x);
        let mask: Rc<Vec<f64>> = Rc::new(
            (0..tx.len()).map(|_| if rng.random::<f64>() < p { 0.0 } else { keep_scale }).collect(),
        );
        let mut out = tx.clone();
        for (o, m) in out.data_mut().iter_mut().zip(mask.iter()) {
            *o *= m;
        }
        let xi = x.0;
        let mask_b = Rc::clone(&mask);
        let back: BackFn = Box::new(move |ctx| {
            let mut dx = ctx.grad.clone();
            for (d, m) in dx.data_mut().iter_mut().zip(mask_b.iter()) {
                *d *= m;
            }
            vec![(xi, dx)]
        });
        self.push("dropout", out, Some(back))
    }

    /// Mean over the batch of -log softmax(logits)[label]. Returns the scalar
    /// loss and the detached softmax probabilities.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<(Var, Tensor)> {
        let tl = self.value(logits);
        if tl.rank() != 2 || tl.rows() != labels.len() {
            return Err(shape_err(
                "softmax_cross_entropy",
                format!("logits {:?} vs {} labels", tl.shape(), labels.len()),
            ));
        }
        let (b, c) = (tl.rows(), tl.cols());
        if b == 0 {
            return Err(TensorError::InvalidArg {
                op: "softmax_cross_entropy",
                detail: "empty batch".into(),
            });
        }
        for &y in labels {
            if y >= c {
                return Err(TensorError::LabelOutOfRange { label: y, classes: c });
            }
        }
        let mut probs = Tensor::zeros(&[b, c]);
        let mut loss = 0.0;
        for r in 0..b {
            let row = tl.row(r);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            loss += lse - row[labels[r]];
            for col in 0..c {
                probs.set2(r, col, (row[col] - lse).exp());
            }
        }
        loss /= b as f64;
        let li = logits.0;
        let probs_b = Rc::new(probs.clone());
        let labels_b: Rc<Vec<usize>> = Rc::new(labels.to_vec());
        let back: BackFn = Box::new(move |ctx| {
            let scale = ctx.grad.item() / b as f64;
            let mut dl = Tensor::zeros(&[b, c]);
            for r in 0..b {
                for col in 0..c {
                    let one_hot = if col == labels_b[r] { 1.0 } else { 0.0 };
                    dl.set2(r, col, scale * (probs_b.get2(r, col) - one_hot));
                }
            }
            vec![(li, dl)]
        });
        let loss_var = self.push("softmax_cross_entropy", Tensor::scalar(loss), Some(back))?;
        Ok((loss_var, probs))
    }
}
