use ndarray::{Array1, Array2, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use super::spec::{LayerKind, LayerSpec, NetworkSpec};
use crate::error::{Error, Result};

/// Initial noise scale; per-layer sigma starts at `sigma0 / sqrt(in_dim)`.
pub const DEFAULT_SIGMA0: f64 = 0.5;

/// Weights of one layer. Also used for gradients and optimizer moments, which
/// share the same shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    /// `out_dim x in_dim`.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub sigma_weight: Option<Array2<f64>>,
    pub sigma_bias: Option<Array1<f64>>,
}

impl LayerParams {
    pub fn zeros(spec: &LayerSpec) -> Self {
        let noisy = spec.kind == LayerKind::Noisy;
        Self {
            weight: Array2::zeros((spec.out_dim, spec.in_dim)),
            bias: Array1::zeros(spec.out_dim),
            sigma_weight: noisy.then(|| Array2::zeros((spec.out_dim, spec.in_dim))),
            sigma_bias: noisy.then(|| Array1::zeros(spec.out_dim)),
        }
    }

    fn init<R: Rng + ?Sized>(spec: &LayerSpec, sigma0: f64, rng: &mut R) -> Self {
        let bound = 1.0 / (spec.in_dim as f64).sqrt();
        let mut layer = Self::zeros(spec);
        layer.weight.mapv_inplace(|_| rng.random_range(-bound..bound));
        layer.bias.mapv_inplace(|_| rng.random_range(-bound..bound));
        let sigma = sigma0 * bound;
        if let Some(s) = layer.sigma_weight.as_mut() {
            s.fill(sigma);
        }
        if let Some(s) = layer.sigma_bias.as_mut() {
            s.fill(sigma);
        }
        layer
    }

    pub fn is_noisy(&self) -> bool {
        self.sigma_weight.is_some()
    }

    /// All tensors of the layer as flat slices, in a fixed order.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = vec![self.weight.as_slice().unwrap(), self.bias.as_slice().unwrap()];
        if let Some(s) = &self.sigma_weight {
            out.push(s.as_slice().unwrap());
        }
        if let Some(s) = &self.sigma_bias {
            out.push(s.as_slice().unwrap());
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = vec![self.weight.as_slice_mut().unwrap(), self.bias.as_slice_mut().unwrap()];
        if let Some(s) = &mut self.sigma_weight {
            out.push(s.as_slice_mut().unwrap());
        }
        if let Some(s) = &mut self.sigma_bias {
            out.push(s.as_slice_mut().unwrap());
        }
        out
    }

    fn matches_spec(&self, spec: &LayerSpec) -> bool {
        let (w, b) = ((spec.out_dim, spec.in_dim), spec.out_dim);
        let noisy = spec.kind == LayerKind::Noisy;
        self.weight.dim() == w
            && self.bias.dim() == b
            && self.sigma_weight.as_ref().map(|s| s.dim()) == noisy.then_some(w)
            && self.sigma_bias.as_ref().map(|s| s.dim()) == noisy.then_some(b)
    }

    fn same_shape(&self, other: &Self) -> bool {
        self.weight.dim() == other.weight.dim()
            && self.bias.dim() == other.bias.dim()
            && self.sigma_weight.as_ref().map(|s| s.dim()) == other.sigma_weight.as_ref().map(|s| s.dim())
            && self.sigma_bias.as_ref().map(|s| s.dim()) == other.sigma_bias.as_ref().map(|s| s.dim())
    }
}

/// Per-layer gradients, shaped like the parameters they belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerParams>,
}

impl Gradients {
    pub fn zeros(spec: &NetworkSpec) -> Self {
        Self { layers: spec.layers().iter().map(LayerParams::zeros).collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.tensors().iter().all(|t| t.iter().all(|v| v.is_finite())))
    }

    pub fn is_zero(&self) -> bool {
        self.layers.iter().all(|l| l.tensors().iter().all(|t| t.iter().all(|&v| v == 0.0)))
    }

    /// Accumulates `other` into `self`.
    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (ta, tb) in a.tensors_mut().into_iter().zip(b.tensors()) {
                Zip::from(ta).and(tb).for_each(|x, &y| *x += y);
            }
        }
    }
}

/// Trainable state of one network: layer weights plus optimizer moments.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub layers: Vec<LayerParams>,
    pub adam: AdamState,
}

impl NetworkParams {
    /// Uniform `±1/sqrt(in_dim)` weights and biases; noisy layers get constant sigma.
    pub fn init<R: Rng + ?Sized>(spec: &NetworkSpec, sigma0: f64, rng: &mut R) -> Self {
        let layers: Vec<_> = spec.layers().iter().map(|l| LayerParams::init(l, sigma0, rng)).collect();
        let adam = AdamState::new(&layers);
        Self { layers, adam }
    }

    pub fn from_layers(layers: Vec<LayerParams>) -> Self {
        let adam = AdamState::new(&layers);
        Self { layers, adam }
    }

    /// Deep copy of weights and optimizer state.
    pub fn clone_params(&self) -> Self {
        self.clone()
    }

    /// True when every weight tensor matches `other` exactly. Optimizer state is ignored.
    pub fn weights_equal(&self, other: &Self) -> bool {
        self.layers == other.layers
    }

    pub fn check_shapes(&self, spec: &NetworkSpec) -> Result<()> {
        let specs = spec.layers();
        if specs.len() != self.layers.len() {
            return Err(Error::Contract(format!(
                "network has {} layers, spec expects {}",
                self.layers.len(),
                specs.len()
            )));
        }
        for (i, (l, s)) in self.layers.iter().zip(&specs).enumerate() {
            if !l.matches_spec(s) {
                return Err(Error::Contract(format!("layer {i} shape does not match its spec")));
            }
        }
        Ok(())
    }

    pub(crate) fn grads_match(&self, grads: &Gradients) -> bool {
        self.layers.len() == grads.layers.len() && self.layers.iter().zip(&grads.layers).all(|(a, b)| a.same_shape(b))
    }

    pub fn num_parameters(&self) -> usize {
        self.layers.iter().map(|l| l.tensors().iter().map(|t| t.len()).sum::<usize>()).sum()
    }
}
