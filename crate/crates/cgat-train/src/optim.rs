//! Adam parameter updates and plateau-triggered learning-rate decay.

use cgat_tensor::ParamStore;

/// First/second gradient moments per parameter, in store order.
#[derive(Clone, Debug)]
pub struct AdamState {
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(store: &ParamStore, beta1: f64, beta2: f64, eps: f64) -> Self {
        let m = store.iter().map(|p| vec![0.0; p.value.len()]).collect();
        let v = store.iter().map(|p| vec![0.0; p.value.len()]).collect();
        Self { beta1, beta2, eps, step: 0, m, v }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update from the gradients currently held in the
/// store. Gradients are left untouched; the caller zeroes them per batch.
pub fn adam_step(store: &mut ParamStore, state: &mut AdamState, lr: f64) {
    state.step += 1;
    let bc1 = 1.0 - state.beta1.powi(state.step as i32);
    let bc2 = 1.0 - state.beta2.powi(state.step as i32);
    for (idx, param) in store.iter_mut().enumerate() {
        let m = &mut state.m[idx];
        let v = &mut state.v[idx];
        let grads = param.grad.data().to_vec();
        for (j, (&g, value)) in grads.iter().zip(param.value.data_mut()).enumerate() {
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g;
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
            let m_hat = m[j] / bc1;
            let v_hat = v[j] / bc2;
            *value -= lr * m_hat / (v_hat.sqrt() + state.eps);
        }
    }
}

/// Halve (by `factor`) the learning rate after `patience` consecutive
/// epochs without validation-loss improvement; strict improvement with a
/// 1e-8 slack. The stall counter resets on every improvement and on every
/// decay, so decays are at least `patience` epochs apart.
#[derive(Clone, Debug)]
pub struct PlateauScheduler {
    lr: f64,
    factor: f64,
    patience: usize,
    best: f64,
    stall: usize,
}

impl PlateauScheduler {
    pub fn new(lr0: f64, factor: f64, patience: usize) -> Self {
        Self { lr: lr0, factor, patience, best: f64::INFINITY, stall: 0 }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    /// Feed one epoch's validation loss; returns the rate for the next epoch.
    pub fn observe(&mut self, val_loss: f64) -> f64 {
        if val_loss < self.best - 1e-8 {
            self.best = val_loss;
            self.stall = 0;
        } else {
            self.stall += 1;
            if self.stall >= self.patience {
                self.lr *= self.factor;
                self.stall = 0;
            }
        }
        self.lr
    }
}
