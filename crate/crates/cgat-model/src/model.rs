use std::path::Path;

use cgat_graph::GraphBatch;
use cgat_tensor::{ParamStore, Tape, Tensor, Var};

use crate::arch::{architecture, Architecture, ForwardCapture, RunMode};
use crate::config::ModelConfig;
use crate::error::{ModelError, Result};
use crate::serialize;

/// A configured architecture together with its parameters.
#[derive(Clone)]
pub struct Model {
    arch: &'static dyn Architecture,
    config: ModelConfig,
    store: ParamStore,
}

impl Model {
    pub fn init(arch_name: &str, config: ModelConfig, seed: u64) -> Result<Self> {
        let arch = architecture(arch_name)
            .ok_or_else(|| ModelError::UnknownArchitecture(arch_name.to_string()))?;
        config.validate()?;
        let store = arch.build_params(&config, seed)?;
        Ok(Self { arch, config, store })
    }

    pub(crate) fn from_parts(
        arch: &'static dyn Architecture,
        config: ModelConfig,
        store: ParamStore,
    ) -> Self {
        Self { arch, config, store }
    }

    pub fn arch_name(&self) -> &'static str {
        self.arch.name()
    }

    /// Whether batches must carry CLS augmentation.
    pub fn wants_cls(&self) -> bool {
        self.arch.wants_cls()
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn num_coefficients(&self) -> usize {
        self.store.coefficient_count()
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        batch: &GraphBatch,
        mode: &mut RunMode,
        capture: Option<&mut ForwardCapture>,
    ) -> Result<Var> {
        self.arch.forward(tape, &self.config, &self.store, batch, mode, capture)
    }

    /// Forward with an externally supplied parameter store (same layout as
    /// this model's own). Lets numeric checkers re-evaluate the network at
    /// perturbed parameter values.
    pub fn forward_with_store(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        batch: &GraphBatch,
    ) -> Result<Var> {
        self.arch.forward(tape, &self.config, store, batch, &mut RunMode::Eval, None)
    }

    pub fn predict(&self, batch: &GraphBatch) -> Result<Prediction> {
        let mut tape = Tape::new();
        let logits = self.forward(&mut tape, batch, &mut RunMode::Eval, None)?;
        Ok(Prediction::from_logits(tape.value(logits)))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        serialize::save_model(path, self.arch.name(), &self.config, &self.store)
    }

    pub fn load(path: &Path) -> Result<Self> {
        serialize::load_model(path)
    }
}

/// Row-softmax probabilities and argmax labels for one batch.
#[derive(Clone, Debug)]
pub struct Prediction {
    pub probabilities: Tensor,
    pub labels: Vec<usize>,
}

impl Prediction {
    pub fn from_logits(logits: &Tensor) -> Self {
        let (rows, cols) = (logits.rows(), logits.cols());
        let mut probabilities = Tensor::zeros(&[rows, cols]);
        let mut labels = Vec::with_capacity(rows);
        for r in 0..rows {
            let row = logits.row(r);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for (c, &v) in row.iter().enumerate() {
                let e = (v - max).exp();
                probabilities.set2(r, c, e);
                sum += e;
            }
            for c in 0..cols {
                let p = probabilities.row(r)[c] / sum;
                probabilities.set2(r, c, p);
            }
            let mut best = 0;
            for c in 1..cols {
                if row[c] > row[best] {
                    best = c;
                }
            }
            labels.push(best);
        }
        Self { probabilities, labels }
    }
}
