use serde::{Deserialize, Serialize};

use super::param::ParamStore;
use super::tensor::Tensor;
use super::NnetError;
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 2e-4, beta1: 0.5, beta2: 0.9, eps: 1e-6 }
    }
}

/// First and second moments for every parameter of a store.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T: Real> {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
}

impl<T: Real> AdamState<T> {
    pub fn new(store: &ParamStore<T>, config: AdamConfig) -> Self {
        let zeros = |s: &ParamStore<T>| s.iter().map(|(_, p)| Tensor::zeros(p.value.shape())).collect();
        Self { config, step: 0, m: zeros(store), v: zeros(store) }
    }

    /// Resets moments and step count, keeping the hyperparameters.
    pub fn reset(&mut self) {
        self.step = 0;
        for t in self.m.iter_mut().chain(self.v.iter_mut()) {
            t.data_mut().fill(T::zero());
        }
    }
}

/// One bias-corrected Adam update. Parameters without a gradient (or frozen)
/// are left untouched; the step counter always advances.
///
/// Gradients are validated before any parameter is modified, so a non-finite
/// gradient leaves both the parameters and the state unchanged.
pub fn adam_step<T: Real>(
    store: &mut ParamStore<T>,
    grads: &[Option<Tensor<T>>],
    state: &mut AdamState<T>,
) -> Result<(), NnetError> {
    if grads.len() != store.len() || state.m.len() != store.len() {
        return Err(NnetError::Shape(format!(
            "adam: {} parameters, {} gradients, {} moments",
            store.len(),
            grads.len(),
            state.m.len()
        )));
    }
    if !(state.config.lr > 0.0) {
        return Err(NnetError::Domain(format!("adam: learning rate must be positive, got {}", state.config.lr)));
    }
    for ((id, p), g) in store.iter().zip(grads) {
        if let Some(g) = g {
            if g.shape() != p.value.shape() || state.m[id.index()].shape() != p.value.shape() {
                return Err(NnetError::Shape(format!("adam: gradient shape mismatch for {}", p.name)));
            }
            if !g.all_finite() {
                return Err(NnetError::NonFiniteGradient(p.name.clone()));
            }
        }
    }
    state.step += 1;
    let c = state.config;
    let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
    let bc1 = T::lit(1.0 - c.beta1.powi(state.step.min(i32::MAX as u64) as i32));
    let bc2 = T::lit(1.0 - c.beta2.powi(state.step.min(i32::MAX as u64) as i32));
    let lr = T::lit(c.lr);
    let eps = T::lit(c.eps);
    for (i, (p, g)) in store.iter_mut().zip(grads).enumerate() {
        let Some(g) = g else { continue };
        if !p.trainable {
            continue;
        }
        let m = state.m[i].data_mut();
        let v = state.v[i].data_mut();
        for (((w, &gi), mi), vi) in p.value.data_mut().iter_mut().zip(g.data()).zip(m.iter_mut()).zip(v.iter_mut()) {
            *mi = b1 * *mi + (T::one() - b1) * gi;
            *vi = b2 * *vi + (T::one() - b2) * gi * gi;
            let mhat = *mi / bc1;
            let vhat = *vi / bc2;
            *w -= lr * mhat / (vhat.sqrt() + eps);
        }
    }
    Ok(())
}
