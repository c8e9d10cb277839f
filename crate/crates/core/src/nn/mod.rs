//! Dense feed-forward networks with exact backpropagation.
//!
//! Supports plain and noisy (factorized Gaussian) linear layers, a single or
//! dueling output head, and an Adam optimizer. Everything operates on
//! row-major batches: one row per sample.

mod adam;
mod checkpoint;
mod network;
mod noise;
mod params;
mod spec;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{Checkpoint, NamedTensor};
pub use network::{argmax, backward, backward_from_cache, forward, forward_cached, forward_one, ForwardCache};
pub use noise::{noise_fn, FactorNoise, NoiseSample};
pub use params::{Gradients, LayerParams, NetworkParams, DEFAULT_SIGMA0};
pub use spec::{Activation, Head, LayerKind, LayerSpec, NetworkSpec};
