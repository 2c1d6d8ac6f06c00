use cgat_graph::GraphBatch;
use cgat_tensor::{ParamStore, Tape, Tensor, Var};
use rand_chacha::ChaCha8Rng;

use crate::config::ModelConfig;
use crate::error::Result;

/// Whether a forward pass applies dropout, and with which noise generator.
pub enum RunMode<'a> {
    Eval,
    Train { rng: &'a mut ChaCha8Rng },
}

/// Per-block attention weights lifted out of a forward pass, aligned to the
/// batch edge list (one weight vector per head).
#[derive(Clone, Debug)]
pub struct AttentionRecord {
    pub block: usize,
    pub per_head: Vec<Vec<f64>>,
}

/// Optional side channel filled by `forward` when inspection is requested.
/// Capturing skips the memory-saving recompute path, so keep batches small.
#[derive(Debug, Default)]
pub struct ForwardCapture {
    pub attention: Vec<AttentionRecord>,
    pub block_states: Vec<Tensor>,
}

/// One graph-classification architecture: how to create parameters and how
/// to run a batch to logits. Implementations are stateless; parameters live
/// in the caller's store.
pub trait Architecture: Send + Sync {
    fn name(&self) -> &'static str;

    /// True when the architecture reads CLS-augmented batches; false for
    /// readout baselines that pool over plain nodes.
    fn wants_cls(&self) -> bool;

    /// Create all parameters in a fixed declaration order.
    fn build_params(&self, config: &ModelConfig, seed: u64) -> Result<ParamStore>;

    /// Run one batch to logits (B x classes).
    fn forward(
        &self,
        tape: &mut Tape,
        config: &ModelConfig,
        store: &ParamStore,
        batch: &GraphBatch,
        mode: &mut RunMode,
        capture: Option<&mut ForwardCapture>,
    ) -> Result<Var>;
}

static CGAT: crate::cgat::CgatArch = crate::cgat::CgatArch;
static GCN: crate::baselines::GcnArch = crate::baselines::GcnArch;
static GAT: crate::baselines::GatArch = crate::baselines::GatArch;

/// Look up an architecture by its registry name.
pub fn architecture(name: &str) -> Option<&'static dyn Architecture> {
    match name {
        "cgat" => Some(&CGAT),
        "gcn" => Some(&GCN),
        "gat" => Some(&GAT),
        _ => None,
    }
}

pub fn architecture_names() -> &'static [&'static str] {
    &["cgat", "gcn", "gat"]
}
