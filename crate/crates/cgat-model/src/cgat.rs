//! The CLS-readout graph attention architecture.
//!
//! Forward pass: learnable CLS row appended to the raw features, joint input
//! projection, a stack of attention blocks (per-head conv, residual + norm,
//! feed-forward, residual + norm), then the CLS embeddings alone feed the
//! classifier head. Blocks run under recompute-on-backward checkpoints
//! unless a capture is requested.

use std::rc::Rc;

use cgat_graph::GraphBatch;
use cgat_tensor::{ParamId, ParamStore, Segments, Tape, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::arch::{Architecture, AttentionRecord, ForwardCapture, RunMode};
use crate::config::{AttentionKind, HeadMerge, ModelConfig};
use crate::error::{ModelError, Result};
use cgat_tensor::Result as TensorResult;
use crate::init::{glorot, ones_vec, zeros_vec};

pub(crate) const LEAKY_SLOPE: f64 = 0.2;
pub(crate) const LN_EPS: f64 = 1e-5;

/// Edge bookkeeping shared by every attention layer of a forward pass.
#[derive(Clone)]
pub(crate) struct EdgeLayout {
    pub src: Rc<Vec<u32>>,
    pub dst: Rc<Vec<u32>>,
    pub segs: Rc<Segments>,
}

impl EdgeLayout {
    pub fn from_batch(batch: &GraphBatch) -> Self {
        Self {
            src: batch.sources(),
            dst: Rc::new(batch.targets()),
            segs: Rc::new(batch.incoming_segments()),
        }
    }
}

#[derive(Clone, Copy)]
pub(crate) enum HeadIds {
    Dynamic { w_src: ParamId, w_dst: ParamId, att: ParamId, bias: Option<ParamId> },
    Static { w: ParamId, att_dst: ParamId, att_src: ParamId },
}

#[derive(Clone, Copy)]
pub(crate) enum HeadVars {
    Dynamic { w_src: Var, w_dst: Var, att: Var, bias: Option<Var> },
    Static { w: Var, att_dst: Var, att_src: Var },
}

pub(crate) fn declare_head(
    store: &mut ParamStore,
    rng: &mut ChaCha8Rng,
    prefix: &str,
    in_width: usize,
    head_width: usize,
    kind: AttentionKind,
    conv_bias: bool,
) -> Result<()> {
    let w_shape = [in_width, head_width];
    match kind {
        AttentionKind::Dynamic => {
            store.add(
                format!("{prefix}.w_src"),
                glorot(rng, &w_shape, in_width, head_width),
            )?;
            store.add(
                format!("{prefix}.w_dst"),
                glorot(rng, &w_shape, in_width, head_width),
            )?;
            store.add(format!("{prefix}.att"), glorot(rng, &[head_width], head_width, 1))?;
            if conv_bias {
                store.add(format!("{prefix}.bias"), zeros_vec(head_width))?;
            }
        }
        AttentionKind::Static => {
            store.add(format!("{prefix}.w"), glorot(rng, &w_shape, in_width, head_width))?;
            store.add(
                format!("{prefix}.att_dst"),
                glorot(rng, &[head_width, 1], head_width, 1),
            )?;
            store.add(
                format!("{prefix}.att_src"),
                glorot(rng, &[head_width, 1], head_width, 1),
            )?;
        }
    }
    Ok(())
}

pub(crate) fn resolve_head(
    store: &ParamStore,
    prefix: &str,
    kind: AttentionKind,
    conv_bias: bool,
) -> Result<HeadIds> {
    Ok(match kind {
        AttentionKind::Dynamic => HeadIds::Dynamic {
            w_src: store.id(&format!("{prefix}.w_src"))?,
            w_dst: store.id(&format!("{prefix}.w_dst"))?,
            att: store.id(&format!("{prefix}.att"))?,
            bias: if conv_bias { Some(store.id(&format!("{prefix}.bias"))?) } else { None },
        },
        AttentionKind::Static => HeadIds::Static {
            w: store.id(&format!("{prefix}.w"))?,
            att_dst: store.id(&format!("{prefix}.att_dst"))?,
            att_src: store.id(&format!("{prefix}.att_src"))?,
        },
    })
}

pub(crate) fn head_to_vars(tape: &mut Tape, store: &ParamStore, ids: HeadIds) -> HeadVars {
    match ids {
        HeadIds::Dynamic { w_src, w_dst, att, bias } => HeadVars::Dynamic {
            w_src: tape.param(store, w_src),
            w_dst: tape.param(store, w_dst),
            att: tape.param(store, att),
            bias: bias.map(|b| tape.param(store, b)),
        },
        HeadIds::Static { w, att_dst, att_src } => HeadVars::Static {
            w: tape.param(store, w),
            att_dst: tape.param(store, att_dst),
            att_src: tape.param(store, att_src),
        },
    }
}

pub(crate) fn flatten_head(vars: HeadVars, out: &mut Vec<Var>) {
    match vars {
        HeadVars::Dynamic { w_src, w_dst, att, bias } => {
            out.extend([w_src, w_dst, att]);
            if let Some(b) = bias {
                out.push(b);
            }
        }
        HeadVars::Static { w, att_dst, att_src } => out.extend([w, att_dst, att_src]),
    }
}

pub(crate) fn unflatten_head(
    it: &mut impl Iterator<Item = Var>,
    kind: AttentionKind,
    conv_bias: bool,
) -> HeadVars {
    match kind {
        AttentionKind::Dynamic => HeadVars::Dynamic {
            w_src: it.next().expect("head var"),
            w_dst: it.next().expect("head var"),
            att: it.next().expect("head var"),
            bias: if conv_bias { Some(it.next().expect("head var")) } else { None },
        },
        AttentionKind::Static => HeadVars::Static {
            w: it.next().expect("head var"),
            att_dst: it.next().expect("head var"),
            att_src: it.next().expect("head var"),
        },
    }
}

/// One attention head: raw edge scores, per-target softmax, weighted
/// aggregation of transformed source rows, then the nonlinearity.
/// Returns the activated conv output and the attention weights.
pub(crate) fn head_conv(
    tape: &mut Tape,
    h: Var,
    vars: HeadVars,
    edges: &EdgeLayout,
) -> TensorResult<(Var, Var)> {
    let (values, scores) = match vars {
        HeadVars::Dynamic { w_src, w_dst, att, bias } => {
            let q = tape.matmul(h, w_src)?;
            let k = tape.matmul(h, w_dst)?;
            let s = tape.attention_edge_scores(
                q,
                k,
                att,
                bias,
                Rc::clone(&edges.src),
                Rc::clone(&edges.dst),
                LEAKY_SLOPE,
            )?;
            // The aggregated value rows reuse the source transform.
            (q, s)
        }
        HeadVars::Static { w, att_dst, att_src } => {
            let v = tape.matmul(h, w)?;
            let per_src = tape.matmul(v, att_src)?;
            let per_dst = tape.matmul(v, att_dst)?;
            let unit = tape.leaf(Tensor::vector(vec![1.0]));
            let s = tape.attention_edge_scores(
                per_src,
                per_dst,
                unit,
                None,
                Rc::clone(&edges.src),
                Rc::clone(&edges.dst),
                LEAKY_SLOPE,
            )?;
            (v, s)
        }
    };
    let alpha = tape.segment_softmax(scores, Rc::clone(&edges.segs))?;
    let agg = tape.scatter_weighted_rows(values, Rc::clone(&edges.src), alpha, Rc::clone(&edges.segs))?;
    let conv = tape.gelu(agg)?;
    Ok((conv, alpha))
}

pub(crate) fn merge_heads(tape: &mut Tape, convs: &[Var], merge: HeadMerge) -> TensorResult<Var> {
    match merge {
        HeadMerge::Max => tape.head_max_pool(convs),
        HeadMerge::Mean => {
            let mut acc = convs[0];
            for &c in &convs[1..] {
                acc = tape.add(acc, c)?;
            }
            tape.scale(acc, 1.0 / convs.len() as f64)
        }
        HeadMerge::Concat => tape.concat_cols(convs),
    }
}

struct BlockIds {
    heads: Vec<HeadIds>,
    ffn_w: ParamId,
    ffn_b: ParamId,
    norm1_gain: ParamId,
    norm1_bias: ParamId,
    norm2_gain: ParamId,
    norm2_bias: ParamId,
}

struct BlockVars {
    heads: Vec<HeadVars>,
    ffn_w: Var,
    ffn_b: Var,
    norm1_gain: Var,
    norm1_bias: Var,
    norm2_gain: Var,
    norm2_bias: Var,
}

fn flatten_block(h: Var, vars: &BlockVars) -> Vec<Var> {
    let mut out = vec![h];
    for &hv in &vars.heads {
        flatten_head(hv, &mut out);
    }
    out.extend([
        vars.ffn_w,
        vars.ffn_b,
        vars.norm1_gain,
        vars.norm1_bias,
        vars.norm2_gain,
        vars.norm2_bias,
    ]);
    out
}

fn unflatten_block(
    flat: &[Var],
    heads: usize,
    kind: AttentionKind,
    conv_bias: bool,
) -> (Var, BlockVars) {
    let mut it = flat.iter().copied();
    let h = it.next().expect("block input");
    let head_vars = (0..heads).map(|_| unflatten_head(&mut it, kind, conv_bias)).collect();
    let vars = BlockVars {
        heads: head_vars,
        ffn_w: it.next().expect("block var"),
        ffn_b: it.next().expect("block var"),
        norm1_gain: it.next().expect("block var"),
        norm1_bias: it.next().expect("block var"),
        norm2_gain: it.next().expect("block var"),
        norm2_bias: it.next().expect("block var"),
    };
    (h, vars)
}

/// Conv with head merge, two residual/norm stages around the feed-forward.
fn block_body(
    tape: &mut Tape,
    h: Var,
    vars: &BlockVars,
    edges: &EdgeLayout,
    merge: HeadMerge,
    mut alphas_out: Option<&mut Vec<Vec<f64>>>,
) -> TensorResult<Var> {
    let mut convs = Vec::with_capacity(vars.heads.len());
    for &hv in &vars.heads {
        let (conv, alpha) = head_conv(tape, h, hv, edges)?;
        if let Some(out) = alphas_out.as_mut() {
            out.push(tape.value(alpha).data().to_vec());
        }
        convs.push(conv);
    }
    let merged = merge_heads(tape, &convs, merge)?;
    let res1 = tape.add(h, merged)?;
    let h1 = tape.layer_norm(res1, vars.norm1_gain, vars.norm1_bias, LN_EPS)?;
    let ff = tape.linear(h1, vars.ffn_w, Some(vars.ffn_b))?;
    let ff = tape.gelu(ff)?;
    let res2 = tape.add(h1, ff)?;
    tape.layer_norm(res2, vars.norm2_gain, vars.norm2_bias, LN_EPS)
}

struct CgatLayout {
    input_w: ParamId,
    input_b: ParamId,
    cls: ParamId,
    blocks: Vec<BlockIds>,
    head_w: ParamId,
    head_b: ParamId,
}

impl CgatLayout {
    fn resolve(config: &ModelConfig, store: &ParamStore) -> Result<Self> {
        let mut blocks = Vec::with_capacity(config.blocks);
        for l in 0..config.blocks {
            let heads = (0..config.heads)
                .map(|k| {
                    resolve_head(
                        store,
                        &format!("block{l}.head{k}"),
                        config.attention,
                        config.conv_bias,
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            blocks.push(BlockIds {
                heads,
                ffn_w: store.id(&format!("block{l}.ffn.weight"))?,
                ffn_b: store.id(&format!("block{l}.ffn.bias"))?,
                norm1_gain: store.id(&format!("block{l}.norm1.gain"))?,
                norm1_bias: store.id(&format!("block{l}.norm1.bias"))?,
                norm2_gain: store.id(&format!("block{l}.norm2.gain"))?,
                norm2_bias: store.id(&format!("block{l}.norm2.bias"))?,
            });
        }
        Ok(Self {
            input_w: store.id("input_proj.weight")?,
            input_b: store.id("input_proj.bias")?,
            cls: store.id("cls_embedding")?,
            blocks,
            head_w: store.id("head.weight")?,
            head_b: store.id("head.bias")?,
        })
    }
}

pub struct CgatArch;

impl Architecture for CgatArch {
    fn name(&self) -> &'static str {
        "cgat"
    }

    fn wants_cls(&self) -> bool {
        true
    }

    fn build_params(&self, config: &ModelConfig, seed: u64) -> Result<ParamStore> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let (d_in, f, fh) = (config.d_in(), config.hidden, config.head_width());
        store.add("input_proj.weight", glorot(&mut rng, &[d_in, f], d_in, f))?;
        store.add("input_proj.bias", zeros_vec(f))?;
        store.add("cls_embedding", glorot(&mut rng, &[1, d_in], 1, d_in))?;
        for l in 0..config.blocks {
            for k in 0..config.heads {
                declare_head(
                    &mut store,
                    &mut rng,
                    &format!("block{l}.head{k}"),
                    f,
                    fh,
                    config.attention,
                    config.conv_bias,
                )?;
            }
            store.add(format!("block{l}.ffn.weight"), glorot(&mut rng, &[f, f], f, f))?;
            store.add(format!("block{l}.ffn.bias"), zeros_vec(f))?;
            store.add(format!("block{l}.norm1.gain"), ones_vec(f))?;
            store.add(format!("block{l}.norm1.bias"), zeros_vec(f))?;
            store.add(format!("block{l}.norm2.gain"), ones_vec(f))?;
            store.add(format!("block{l}.norm2.bias"), zeros_vec(f))?;
        }
        store.add("head.weight", glorot(&mut rng, &[f, config.classes], f, config.classes))?;
        store.add("head.bias", zeros_vec(config.classes))?;
        Ok(store)
    }

    fn forward(
        &self,
        tape: &mut Tape,
        config: &ModelConfig,
        store: &ParamStore,
        batch: &GraphBatch,
        mode: &mut RunMode,
        mut capture: Option<&mut ForwardCapture>,
    ) -> Result<Var> {
        match batch.cls_mode() {
            None => return Err(ModelError::MissingCls),
            Some(m) if m != config.cls_mode => {
                return Err(ModelError::ConfigMismatch {
                    detail: format!(
                        "batch CLS wiring '{}' vs model '{}'",
                        m.name(),
                        config.cls_mode.name()
                    ),
                })
            }
            Some(_) => {}
        }
        if batch.d_in() != config.d_in() {
            return Err(ModelError::ConfigMismatch {
                detail: format!(
                    "batch feature width {} vs model {}",
                    batch.d_in(),
                    config.d_in()
                ),
            });
        }
        let layout = CgatLayout::resolve(config, store)?;

        // Input: learnable CLS row per sample joins the raw features before
        // the shared projection.
        let x = tape.leaf(batch.real_features().clone());
        let cls = tape.param(store, layout.cls);
        let cls_rows = tape.repeat_row(cls, batch.n_graphs())?;
        let stacked = tape.concat_rows(x, cls_rows)?;
        let x_aug = tape.gather_rows(stacked, Rc::new(batch.aug_perm()))?;
        let w_in = tape.param(store, layout.input_w);
        let b_in = tape.param(store, layout.input_b);
        let mut h = tape.linear(x_aug, w_in, Some(b_in))?;

        let edges = EdgeLayout::from_batch(batch);
        for (l, ids) in layout.blocks.iter().enumerate() {
            let vars = BlockVars {
                heads: ids.heads.iter().map(|&hi| head_to_vars(tape, store, hi)).collect(),
                ffn_w: tape.param(store, ids.ffn_w),
                ffn_b: tape.param(store, ids.ffn_b),
                norm1_gain: tape.param(store, ids.norm1_gain),
                norm1_bias: tape.param(store, ids.norm1_bias),
                norm2_gain: tape.param(store, ids.norm2_gain),
                norm2_bias: tape.param(store, ids.norm2_bias),
            };
            h = if let Some(cap) = capture.as_mut() {
                let mut alphas = Vec::with_capacity(config.heads);
                let out = block_body(tape, h, &vars, &edges, config.head_merge, Some(&mut alphas))?;
                cap.attention.push(AttentionRecord { block: l, per_head: alphas });
                cap.block_states.push(tape.value(out).clone());
                out
            } else {
                let inputs = flatten_block(h, &vars);
                let (heads, kind, conv_bias, merge) =
                    (config.heads, config.attention, config.conv_bias, config.head_merge);
                let edges_c = edges.clone();
                tape.checkpoint(&inputs, move |sub, flat| {
                    let (hh, bv) = unflatten_block(flat, heads, kind, conv_bias);
                    block_body(sub, hh, &bv, &edges_c, merge, None)
                })?
            };
        }

        let cls_idx: Rc<Vec<u32>> =
            Rc::new(batch.cls_indices().iter().map(|&i| i as u32).collect());
        let mut pooled = tape.gather_rows(h, cls_idx)?;
        if let RunMode::Train { rng } = mode {
            if config.dropout_p > 0.0 {
                pooled = tape.dropout(pooled, config.dropout_p, true, rng)?;
            }
        }
        let head_w = tape.param(store, layout.head_w);
        let head_b = tape.param(store, layout.head_b);
        Ok(tape.linear(pooled, head_w, Some(head_b))?)
    }
}
