use ndarray::Zip;
use serde::{Deserialize, Serialize};

use super::params::{Gradients, LayerParams, NetworkParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First and second moment accumulators plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<LayerParams>,
    pub v: Vec<LayerParams>,
    pub step: u64,
}

impl AdamState {
    pub fn new(layers: &[LayerParams]) -> Self {
        let zeros: Vec<LayerParams> = layers
            .iter()
            .map(|l| {
                let mut z = l.clone();
                z.tensors_mut().into_iter().for_each(|t| t.fill(0.0));
                z
            })
            .collect();
        Self { m: zeros.clone(), v: zeros, step: 0 }
    }
}

/// Bias-corrected Adam update applied in place.
pub fn adam_step(params: &mut NetworkParams, grads: &Gradients, cfg: &AdamConfig) -> Result<()> {
    if !params.grads_match(grads) {
        return Err(Error::Contract("gradient shapes do not match parameters".into()));
    }
    if !grads.is_finite() {
        return Err(Error::Numeric(format!("non-finite gradient at optimizer step {}", params.adam.step + 1)));
    }
    let state = &mut params.adam;
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    let (b1, b2, lr, eps) = (cfg.beta1, cfg.beta2, cfg.lr, cfg.eps);

    for (((layer, g), m), v) in params.layers.iter_mut().zip(&grads.layers).zip(&mut state.m).zip(&mut state.v) {
        for (((p, g), m), v) in
            layer.tensors_mut().into_iter().zip(g.tensors()).zip(m.tensors_mut()).zip(v.tensors_mut())
        {
            Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            });
        }
    }
    Ok(())
}
