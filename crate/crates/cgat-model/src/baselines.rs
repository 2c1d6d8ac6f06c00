//! Readout baselines: plain conv stacks over self-loop graphs with
//! mean pooling into the same classifier head.

use std::rc::Rc;

use cgat_graph::GraphBatch;
use cgat_tensor::{ParamStore, Tape, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::arch::{Architecture, AttentionRecord, ForwardCapture, RunMode};
use crate::cgat::{
    declare_head, flatten_head, head_conv, head_to_vars, merge_heads, resolve_head,
    unflatten_head, EdgeLayout, HeadIds, HeadVars,
};
use crate::config::ModelConfig;
use crate::error::{ModelError, Result};
use crate::init::{glorot, zeros_vec};

/// Degree-symmetric edge coefficients 1/sqrt(deg(src)*deg(dst)), with
/// degrees counted over the given list (self-loops included by the caller).
pub fn symmetric_normalization(edges: &[(u32, u32)], n_nodes: usize) -> Vec<f64> {
    let mut deg = vec![0u32; n_nodes];
    for &(_, t) in edges {
        deg[t as usize] += 1;
    }
    edges
        .iter()
        .map(|&(s, t)| {
            let d = deg[s as usize] as f64 * deg[t as usize] as f64;
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect()
}

fn check_plain(config: &ModelConfig, batch: &GraphBatch) -> Result<()> {
    if batch.cls_mode().is_some() {
        return Err(ModelError::ClsNodePresent);
    }
    if batch.d_in() != config.d_in() {
        return Err(ModelError::ConfigMismatch {
            detail: format!("batch feature width {} vs model {}", batch.d_in(), config.d_in()),
        });
    }
    Ok(())
}

/// Mean-pool per graph, optional dropout, classifier head.
fn readout(
    tape: &mut Tape,
    config: &ModelConfig,
    store: &ParamStore,
    batch: &GraphBatch,
    h: Var,
    mode: &mut RunMode,
) -> Result<Var> {
    let node_segs = Rc::new(batch.real_node_segments());
    let mut pooled = tape.segment_mean_rows(h, node_segs)?;
    if let RunMode::Train { rng } = mode {
        if config.dropout_p > 0.0 {
            pooled = tape.dropout(pooled, config.dropout_p, true, rng)?;
        }
    }
    let w = tape.param(store, store.id("head.weight")?);
    let b = tape.param(store, store.id("head.bias")?);
    Ok(tape.linear(pooled, w, Some(b))?)
}

fn declare_readout_head(
    store: &mut ParamStore,
    rng: &mut ChaCha8Rng,
    config: &ModelConfig,
) -> Result<()> {
    let (f, c) = (config.hidden, config.classes);
    store.add("head.weight", glorot(rng, &[f, c], f, c))?;
    store.add("head.bias", zeros_vec(c))?;
    Ok(())
}

pub struct GcnArch;

impl Architecture for GcnArch {
    fn name(&self) -> &'static str {
        "gcn"
    }

    fn wants_cls(&self) -> bool {
        false
    }

    fn build_params(&self, config: &ModelConfig, seed: u64) -> Result<ParamStore> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let f = config.hidden;
        for l in 0..config.blocks {
            let w_in = if l == 0 { config.d_in() } else { f };
            store.add(format!("layer{l}.weight"), glorot(&mut rng, &[w_in, f], w_in, f))?;
            store.add(format!("layer{l}.bias"), zeros_vec(f))?;
        }
        declare_readout_head(&mut store, &mut rng, config)?;
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
        check_plain(config, batch)?;
        let src = batch.sources();
        let segs = Rc::new(batch.incoming_segments());
        let norm: Rc<Vec<f64>> =
            Rc::new(symmetric_normalization(batch.edges(), batch.total_nodes()));
        let mut h = tape.leaf(batch.real_features().clone());
        for l in 0..config.blocks {
            let w = tape.param(store, store.id(&format!("layer{l}.weight"))?);
            let b = tape.param(store, store.id(&format!("layer{l}.bias"))?);
            let body = {
                let (src, segs, norm) = (Rc::clone(&src), Rc::clone(&segs), Rc::clone(&norm));
                move |sub: &mut Tape, vars: &[Var]| -> cgat_tensor::Result<Var> {
                    let values = sub.linear(vars[0], vars[1], Some(vars[2]))?;
                    let coeff = sub.leaf(Tensor::vector(norm.as_ref().clone()));
                    let agg =
                        sub.scatter_weighted_rows(values, Rc::clone(&src), coeff, Rc::clone(&segs))?;
                    sub.gelu(agg)
                }
            };
            h = if capture.is_some() {
                body(tape, &[h, w, b])?
            } else {
                tape.checkpoint(&[h, w, b], body)?
            };
            if let Some(cap) = capture.as_mut() {
                cap.block_states.push(tape.value(h).clone());
            }
        }
        readout(tape, config, store, batch, h, mode)
    }
}

pub struct GatArch;

struct GatLayerIds {
    heads: Vec<HeadIds>,
}

impl GatArch {
    fn layer_ids(&self, config: &ModelConfig, store: &ParamStore) -> Result<Vec<GatLayerIds>> {
        (0..config.blocks)
            .map(|l| {
                let heads = (0..config.heads)
                    .map(|k| {
                        resolve_head(
                            store,
                            &format!("layer{l}.head{k}"),
                            config.attention,
                            config.conv_bias,
                        )
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(GatLayerIds { heads })
            })
            .collect()
    }
}

impl Architecture for GatArch {
    fn name(&self) -> &'static str {
        "gat"
    }

    fn wants_cls(&self) -> bool {
        false
    }

    fn build_params(&self, config: &ModelConfig, seed: u64) -> Result<ParamStore> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let fh = config.head_width();
        for l in 0..config.blocks {
            let w_in = if l == 0 { config.d_in() } else { config.hidden };
            for k in 0..config.heads {
                declare_head(
                    &mut store,
                    &mut rng,
                    &format!("layer{l}.head{k}"),
                    w_in,
                    fh,
                    config.attention,
                    config.conv_bias,
                )?;
            }
        }
        declare_readout_head(&mut store, &mut rng, config)?;
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
        check_plain(config, batch)?;
        let edges = EdgeLayout::from_batch(batch);
        let layers = self.layer_ids(config, store)?;
        let mut h = tape.leaf(batch.real_features().clone());
        for (l, ids) in layers.iter().enumerate() {
            let head_vars: Vec<HeadVars> =
                ids.heads.iter().map(|&hi| head_to_vars(tape, store, hi)).collect();
            h = if let Some(cap) = capture.as_mut() {
                let mut alphas = Vec::with_capacity(config.heads);
                let mut convs = Vec::with_capacity(config.heads);
                for &hv in &head_vars {
                    let (conv, alpha) = head_conv(tape, h, hv, &edges)?;
                    alphas.push(tape.value(alpha).data().to_vec());
                    convs.push(conv);
                }
                let out = merge_heads(tape, &convs, config.head_merge)?;
                cap.attention.push(AttentionRecord { block: l, per_head: alphas });
                cap.block_states.push(tape.value(out).clone());
                out
            } else {
                let mut inputs = vec![h];
                for &hv in &head_vars {
                    flatten_head(hv, &mut inputs);
                }
                let (heads, kind, conv_bias, merge) =
                    (config.heads, config.attention, config.conv_bias, config.head_merge);
                let edges_c = edges.clone();
                tape.checkpoint(&inputs, move |sub, flat| {
                    let mut it = flat.iter().copied();
                    let hh = it.next().expect("layer input");
                    let mut convs = Vec::with_capacity(heads);
                    for _ in 0..heads {
                        let hv = unflatten_head(&mut it, kind, conv_bias);
                        let (conv, _) = head_conv(sub, hh, hv, &edges_c)?;
                        convs.push(conv);
                    }
                    merge_heads(sub, &convs, merge)
                })?
            };
        }
        readout(tape, config, store, batch, h, mode)
    }
}
