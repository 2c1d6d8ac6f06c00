//! The epoch loop: balanced resampling, Adam updates, validation-driven
//! learning-rate decay, and best-checkpoint tracking.

use cgat_model::{Model, RunMode};
use cgat_tensor::Tape;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::batch::balanced_batches;
use crate::metrics::evaluate_predictions;
use crate::optim::{adam_step, AdamState, PlateauScheduler};
use crate::split::Split;
use crate::{Dataset, Result, TrainError};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr0: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub patience: usize,
    pub factor: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr0: 0.001,
            epochs: 150,
            batch_size: 32,
            patience: 5,
            factor: 0.5,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |detail: String| Err(TrainError::InvalidConfig { detail });
        if !(self.lr0 > 0.0) {
            return fail(format!("learning rate must be positive, got {}", self.lr0));
        }
        if !(self.factor > 0.0 && self.factor < 1.0) {
            return fail(format!("decay factor must sit in (0, 1), got {}", self.factor));
        }
        if self.patience == 0 {
            return fail("patience must be at least 1 epoch".into());
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return fail("epochs and batch size must be positive".into());
        }
        Ok(())
    }
}

/// One row of the training history.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_f1: f64,
    pub lr: f64,
}

pub struct TrainOutcome {
    /// Parameters after the last epoch.
    pub final_model: Model,
    /// Snapshot from the epoch with the highest validation weighted F1
    /// (the final model when there is no validation split).
    pub best_model: Model,
    pub best_epoch: Option<usize>,
    pub history: Vec<EpochStats>,
}

/// Tab-separated history with a header row, one line per epoch.
pub fn history_table(history: &[EpochStats]) -> String {
    let mut out = String::from("epoch\ttrain_loss\tval_loss\tval_f1\tlr\n");
    for row in history {
        out.push_str(&format!(
            "{}\t{:.6}\t{:.6}\t{:.6}\t{:.8}\n",
            row.epoch, row.train_loss, row.val_loss, row.val_f1, row.lr
        ));
    }
    out
}

/// Train `model` on the split's training partition. Every batch is a fresh
/// inverse-frequency resample; validation runs once per epoch in eval mode
/// and drives both the plateau scheduler and best-checkpoint selection.
pub fn train(
    model: Model,
    data: &Dataset,
    split: &Split,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if split.train.is_empty() {
        return Err(TrainError::InvalidConfig { detail: "empty training split".into() });
    }
    let mut model = model;
    let cls = model.wants_cls().then(|| model.config().cls_mode);
    let train_labels = data.labels_of(&split.train);
    let mut adam = AdamState::new(model.store(), config.beta1, config.beta2, config.eps);
    let mut scheduler = PlateauScheduler::new(config.lr0, config.factor, config.patience);
    // Dropout noise lives on its own stream so it never collides with the
    // per-epoch batch sampling streams.
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(config.seed);
    dropout_rng.set_stream(u64::MAX);

    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, Model)> = None;
    for epoch in 0..config.epochs {
        let lr = scheduler.lr();
        let batches =
            balanced_batches(&train_labels, config.batch_size, config.seed, epoch as u64);
        let mut loss_sum = 0.0;
        for positions in &batches {
            let indices: Vec<usize> = positions.iter().map(|&p| split.train[p]).collect();
            let gb = data.batch(&indices, cls)?;
            let labels = data.labels_of(&indices);
            model.store_mut().zero_grads();
            let mut tape = Tape::new();
            let logits =
                model.forward(&mut tape, &gb, &mut RunMode::Train { rng: &mut dropout_rng }, None)?;
            let (loss, _) = tape.softmax_cross_entropy(logits, &labels)?;
            loss_sum += tape.value(loss).item();
            tape.backward(loss, model.store_mut())?;
            adam_step(model.store_mut(), &mut adam, lr);
        }
        let train_loss = loss_sum / batches.len() as f64;

        let (val_loss, val_f1) = if split.val.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            let (loss, f1) = validation_pass(&model, data, split, config.batch_size)?;
            scheduler.observe(loss);
            if best.as_ref().is_none_or(|(b, _, _)| f1 > *b) {
                best = Some((f1, epoch, model.clone()));
            }
            (loss, f1)
        };
        history.push(EpochStats { epoch, train_loss, val_loss, val_f1, lr });
    }

    let (best_epoch, best_model) = match best {
        Some((_, epoch, snapshot)) => (Some(epoch), snapshot),
        None => (None, model.clone()),
    };
    Ok(TrainOutcome { final_model: model, best_model, best_epoch, history })
}

fn validation_pass(
    model: &Model,
    data: &Dataset,
    split: &Split,
    batch_size: usize,
) -> Result<(f64, f64)> {
    let cls = model.wants_cls().then(|| model.config().cls_mode);
    let mut loss_sum = 0.0;
    let mut predicted = Vec::with_capacity(split.val.len());
    for chunk in split.val.chunks(batch_size) {
        let gb = data.batch(chunk, cls)?;
        let labels = data.labels_of(chunk);
        let mut tape = Tape::new();
        let logits = model.forward(&mut tape, &gb, &mut RunMode::Eval, None)?;
        let (loss, probs) = tape.softmax_cross_entropy(logits, &labels)?;
        loss_sum += tape.value(loss).item() * chunk.len() as f64;
        for r in 0..probs.rows() {
            let row = probs.row(r);
            let arg = row
                .iter()
                .enumerate()
                .fold((0usize, f64::NEG_INFINITY), |acc, (c, &p)| {
                    if p > acc.1 {
                        (c, p)
                    } else {
                        acc
                    }
                })
                .0;
            predicted.push(arg);
        }
    }
    let truth = data.labels_of(&split.val);
    let f1 = evaluate_predictions(&truth, &predicted, data.classes)?.weighted_f1;
    Ok((loss_sum / split.val.len() as f64, f1))
}
