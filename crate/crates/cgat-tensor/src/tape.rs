//! Reverse-mode autodiff on a recorded operation tape.
//!
//! Each op pushes one node holding its output value plus a closure that maps
//! the node's output gradient to gradient contributions for its inputs.
//! `backward` walks the tape in reverse, accumulating into parameter grads.

use std::rc::Rc;

use crate::error::{Result, TensorError};
use crate::param::{ParamId, ParamStore};
use crate::tensor::Tensor;

/// Handle to one tape node. Only valid for the tape that produced it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

/// Read access to forward values during the backward sweep.
pub struct BackCtx<'a> {
    values: &'a [Tensor],
    pub grad: &'a Tensor,
}

impl<'a> BackCtx<'a> {
    pub fn value(&self, id: usize) -> &Tensor {
        &self.values[id]
    }
}

pub(crate) type BackFn = Box<dyn Fn(&BackCtx) -> Vec<(usize, Tensor)>>;

struct Node {
    back: Option<BackFn>,
    param: Option<usize>,
}

type CheckpointFn = dyn Fn(&mut Tape, &[Var]) -> Result<Var>;

#[derive(Default)]
pub struct Tape {
    values: Vec<Tensor>,
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.values[v.0]
    }

    /// Record a constant input. Gradients may flow to it but go nowhere.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push_unchecked(value, None, None)
    }

    /// Record a parameter leaf; `backward` accumulates its gradient into the
    /// store entry with the same id.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        self.push_unchecked(store.value(id).clone(), None, Some(id.index()))
    }

    /// Id the next pushed node will get; lets op closures name their output.
    pub(crate) fn next_id(&self) -> usize {
        self.nodes.len()
    }

    pub(crate) fn push(&mut self, op: &'static str, value: Tensor, back: Option<BackFn>) -> Result<Var> {
        if !value.is_all_finite() {
            return Err(TensorError::NonFinite { op });
        }
        Ok(self.push_unchecked(value, back, None))
    }

    fn push_unchecked(&mut self, value: Tensor, back: Option<BackFn>, param: Option<usize>) -> Var {
        let id = self.nodes.len();
        self.values.push(value);
        self.nodes.push(Node { back, param });
        Var(id)
    }

    /// Reverse sweep from a scalar loss, accumulating parameter gradients.
    pub fn backward(&self, loss: Var, store: &mut ParamStore) -> Result<()> {
        let seed = self.value(loss);
        if seed.len() != 1 {
            return Err(TensorError::InvalidArg {
                op: "backward",
                detail: format!("loss must be scalar, got shape {:?}", seed.shape()),
            });
        }
        let grads = self.sweep(vec![(loss.0, Tensor::scalar(1.0))]);
        for (node, grad) in self.nodes.iter().zip(&grads) {
            if let (Some(pid), Some(g)) = (node.param, grad.as_ref()) {
                if !g.is_all_finite() {
                    return Err(TensorError::NonFinite { op: "backward" });
                }
                store.accumulate_grad(pid, g);
            }
        }
        Ok(())
    }

    /// Core reverse sweep. Returns per-node gradients; interior-node grads are
    /// dropped as soon as they have been propagated, leaf grads are kept.
    fn sweep(&self, seeds: Vec<(usize, Tensor)>) -> Vec<Option<Tensor>> {
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        let mut start = 0;
        for (id, seed) in seeds {
            start = start.max(id);
            accumulate(&mut grads, id, seed);
        }
        for i in (0..=start.min(self.nodes.len().saturating_sub(1))).rev() {
            if grads[i].is_none() {
                continue;
            }
            if let Some(back) = &self.nodes[i].back {
                let g = grads[i].take().expect("grad present");
                let ctx = BackCtx { values: &self.values, grad: &g };
                for (id, contribution) in back(&ctx) {
                    debug_assert!(id < i, "backward contribution flows forward");
                    accumulate(&mut grads, id, contribution);
                }
            }
        }
        grads
    }

    /// Run `f` on a private sub-tape, keeping only its output on this tape.
    /// The backward pass re-runs `f` to rebuild the discarded intermediates,
    /// trading compute for memory. `f` must be deterministic and must reach
    /// every trainable input through `inputs`.
    pub fn checkpoint<F>(&mut self, inputs: &[Var], f: F) -> Result<Var>
    where
        F: Fn(&mut Tape, &[Var]) -> Result<Var> + 'static,
    {
        let f: Rc<CheckpointFn> = Rc::new(f);
        let input_ids: Rc<Vec<usize>> = Rc::new(inputs.iter().map(|v| v.0).collect());

        let mut sub = Tape::new();
        let sub_inputs: Vec<Var> =
            input_ids.iter().map(|&id| sub.leaf(self.values[id].clone())).collect();
        let out = f(&mut sub, &sub_inputs)?;
        let out_value = sub.value(out).clone();
        drop(sub);

        let f_back = Rc::clone(&f);
        let ids_back = Rc::clone(&input_ids);
        let back: BackFn = Box::new(move |ctx| {
            let mut sub = Tape::new();
            let sub_inputs: Vec<Var> =
                ids_back.iter().map(|&id| sub.leaf(ctx.value(id).clone())).collect();
            let out = f_back(&mut sub, &sub_inputs)
                .expect("checkpoint recompute diverged from forward run");
            let mut grads = sub.sweep(vec![(out.0, ctx.grad.clone())]);
            ids_back
                .iter()
                .enumerate()
                .filter_map(|(slot, &id)| grads[slot].take().map(|g| (id, g)))
                .collect()
        });
        self.push("checkpoint", out_value, Some(back))
    }
}

fn accumulate(grads: &mut [Option<Tensor>], id: usize, g: Tensor) {
    match &mut grads[id] {
        Some(acc) => acc.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}
