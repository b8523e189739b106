//! Adam with bias-corrected moment estimates.
//!
//! Moments are kept as flat buffers aligned with the model's
//! checkpoint parameter order, so the optimizer state is independent of
//! layer shapes. A non-finite gradient aborts the step before any
//! parameter is touched — a poisoned update would silently corrupt the
//! whole trajectory otherwise.

use super::matrix::Matrix;
use super::{Mlp, NnError};

/// Gradients for one dense layer, same shapes as the layer itself.
#[derive(Clone, Debug)]
pub struct LayerGrads {
    pub weights: Matrix,
    pub bias: Matrix,
}

/// Per-layer gradients in model order.
#[derive(Clone, Debug)]
pub struct Gradients {
    pub layers: Vec<LayerGrads>,
}

impl Gradients {
    /// Flatten in checkpoint order (`w0, b0, w1, b1, ...`).
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(l.weights.data());
            out.extend_from_slice(l.bias.data());
        }
        out
    }
}

#[derive(Clone, Copy, Debug)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        AdamConfig { learning_rate, ..Default::default() }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Optimizer state: first/second moment buffers plus the step counter
/// used for bias correction.
#[derive(Clone, Debug)]
pub struct AdamState {
    cfg: AdamConfig,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(cfg: AdamConfig, param_count: usize) -> Self {
        AdamState { cfg, step: 0, m: vec![0.0; param_count], v: vec![0.0; param_count] }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Apply one update to `model` in place. Fails (without touching
    /// the model) if any gradient entry is non-finite.
    pub fn apply(&mut self, model: &mut Mlp, grads: &Gradients) -> Result<(), NnError> {
        // Validate first: either the whole update happens or none of it.
        for (layer_idx, lg) in grads.layers.iter().enumerate() {
            for (i, g) in lg.weights.data().iter().chain(lg.bias.data()).enumerate() {
                if !g.is_finite() {
                    return Err(NnError::NonFiniteGradient { layer: layer_idx, index: i });
                }
            }
        }
        let flat_grads = grads.flat();
        assert_eq!(flat_grads.len(), self.m.len(), "gradient count does not match optimizer state");

        self.step += 1;
        let t = self.step as i32;
        let AdamConfig { learning_rate, beta1, beta2, epsilon } = self.cfg;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);

        let mut offset = 0;
        for layer in model.layers_mut() {
            for param in [layer.weights.data_mut(), layer.bias.data_mut()] {
                for p in param.iter_mut() {
                    let g = flat_grads[offset];
                    let m = &mut self.m[offset];
                    let v = &mut self.v[offset];
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    let m_hat = *m / bc1;
                    let v_hat = *v / bc2;
                    *p -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
                    offset += 1;
                }
            }
        }
        Ok(())
    }
}
