//! Adam optimizer, finite-difference gradient checking, and early stopping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feats::EncodedExample;
use crate::neural::{backward, bce_loss, forward_with_mask, DropoutMask, Gradients, ModelParams};

/// Adam hyperparameters. Only the learning rate differs from the method's
/// published defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamHyper {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

/// First/second-moment accumulators plus the step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Gradients,
    v: Gradients,
    t: u64,
    hyper: AdamHyper,
}

impl AdamState {
    pub fn new(params: &ModelParams, hyper: AdamHyper) -> Self {
        Self {
            m: Gradients::zeros_like(params),
            v: Gradients::zeros_like(params),
            t: 0,
            hyper,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}

/// One Adam update in place:
/// m ← β₁m + (1−β₁)g, v ← β₂v + (1−β₂)g², bias-corrected m̂/v̂,
/// θ ← θ − lr·m̂/(√v̂ + eps).
pub fn adam_step(state: &mut AdamState, params: &mut ModelParams, grads: &Gradients) -> Result<()> {
    if !grads.is_finite() {
        return Err(Error::NonFinite("gradients passed to adam_step".into()));
    }
    state.t += 1;
    let AdamHyper {
        lr,
        beta1,
        beta2,
        eps,
    } = state.hyper;
    let bc1 = 1.0 - beta1.powi(state.t as i32);
    let bc2 = 1.0 - beta2.powi(state.t as i32);

    let p_tensors = params.tensor_list_mut();
    let g_tensors = grads.tensor_list();
    let m_tensors = state.m.tensor_list_mut();
    let v_tensors = state.v.tensor_list_mut();
    if p_tensors.len() != g_tensors.len() {
        return Err(Error::Shape(
            "gradient tree does not match parameters".into(),
        ));
    }
    for (((pt, gt), mt), vt) in p_tensors
        .into_iter()
        .zip(g_tensors)
        .zip(m_tensors)
        .zip(v_tensors)
    {
        if pt.len() != gt.len() {
            return Err(Error::Shape("gradient tensor shape mismatch".into()));
        }
        for k in 0..pt.len() {
            let g = gt[k];
            mt[k] = beta1 * mt[k] + (1.0 - beta1) * g;
            vt[k] = beta2 * vt[k] + (1.0 - beta2) * g * g;
            let m_hat = mt[k] / bc1;
            let v_hat = vt[k] / bc2;
            pt[k] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

/// Maximum relative error between analytic BPTT gradients and central finite
/// differences over every parameter slot. Dropout is disabled (identity mask).
/// Parameters are restored bit-exactly afterwards.
pub fn grad_check(params: &mut ModelParams, example: &EncodedExample, step: f64) -> Result<f64> {
    if step <= 0.0 {
        return Err(Error::InvalidArgument("grad_check step must be > 0".into()));
    }
    let mask = DropoutMask::identity(2 * params.hidden_dim);
    let (_, grads) = backward(params, &example.x, example.y, &mask)?;
    let analytic: Vec<Vec<f64>> = grads.tensor_list().iter().map(|t| t.to_vec()).collect();

    let mut max_rel = 0.0f64;
    // Indexed loops: the slot at (ti, si) is perturbed through fresh
    // `tensor_list_mut` views, so no iterator over `params` can stay alive.
    #[allow(clippy::needless_range_loop)]
    for ti in 0..analytic.len() {
        for si in 0..analytic[ti].len() {
            let orig = params.tensor_list()[ti][si];
            params.tensor_list_mut()[ti][si] = orig + step;
            let loss_plus = loss_at(params, example, &mask)?;
            params.tensor_list_mut()[ti][si] = orig - step;
            let loss_minus = loss_at(params, example, &mask)?;
            params.tensor_list_mut()[ti][si] = orig;

            let numeric = (loss_plus - loss_minus) / (2.0 * step);
            let a = analytic[ti][si];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            max_rel = max_rel.max(rel);
        }
    }
    Ok(max_rel)
}

fn loss_at(params: &ModelParams, example: &EncodedExample, mask: &DropoutMask) -> Result<f64> {
    let p = forward_with_mask(params, &example.x, mask)?;
    Ok(bce_loss(p, example.y))
}

/// Decision returned by [`EarlyStopping::update`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EarlyStopOutcome {
    /// The metric strictly improved over the previous best.
    pub improved: bool,
    /// Patience is exhausted; training should stop after this epoch.
    pub stop: bool,
}

/// Patience-based early stopping on a dev metric (higher is better).
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    best_metric: f64,
    best_epoch: u64,
    patience: u64,
    epochs_since_best: u64,
}

impl EarlyStopping {
    pub fn new(patience: u64) -> Self {
        Self {
            best_metric: f64::NEG_INFINITY,
            best_epoch: 0,
            patience,
            epochs_since_best: 0,
        }
    }

    /// Records the dev metric for `epoch` (1-based). Improvement means a
    /// strict increase beyond 1e-9 over the best seen; `patience` consecutive
    /// epochs without improvement stop the run. Ties never move `best_epoch`,
    /// so the earliest epoch with the maximal metric is kept.
    pub fn update(&mut self, epoch: u64, dev_metric: f64) -> EarlyStopOutcome {
        let improved = dev_metric > self.best_metric + 1e-9;
        if improved {
            self.best_metric = dev_metric;
            self.best_epoch = epoch;
            self.epochs_since_best = 0;
        } else {
            self.epochs_since_best += 1;
        }
        EarlyStopOutcome {
            improved,
            stop: self.epochs_since_best >= self.patience,
        }
    }

    pub fn best_epoch(&self) -> u64 {
        self.best_epoch
    }

    pub fn best_metric(&self) -> f64 {
        self.best_metric
    }
}
