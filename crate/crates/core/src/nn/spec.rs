use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerKind {
    Linear,
    Noisy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Head {
    Single {
        num_actions: usize,
    },
    /// Scalar value stream plus per-action advantage stream over the shared
    /// trunk, combined as `V + A - mean(A)`.
    Dueling {
        num_actions: usize,
    },
}

impl Head {
    pub fn num_actions(&self) -> usize {
        match *self {
            Head::Single { num_actions } | Head::Dueling { num_actions } => num_actions,
        }
    }
}

/// Topology of a network: a trunk of hidden layers followed by an output head.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub trunk: Vec<LayerSpec>,
    pub head: Head,
    /// Layer kind used for every head layer.
    pub head_kind: LayerKind,
}

impl NetworkSpec {
    /// ReLU MLP with the given hidden widths. With `noisy`, the last hidden
    /// layer and the head layers are noisy; earlier trunk layers stay plain.
    pub fn mlp(input_dim: usize, hidden: &[usize], head: Head, noisy: bool) -> Self {
        let mut trunk = Vec::with_capacity(hidden.len());
        let mut prev = input_dim;
        for (i, &width) in hidden.iter().enumerate() {
            let kind = if noisy && i + 1 == hidden.len() { LayerKind::Noisy } else { LayerKind::Linear };
            trunk.push(LayerSpec { kind, in_dim: prev, out_dim: width, activation: Activation::Relu });
            prev = width;
        }
        let head_kind = if noisy { LayerKind::Noisy } else { LayerKind::Linear };
        Self { input_dim, trunk, head, head_kind }
    }

    pub fn num_actions(&self) -> usize {
        self.head.num_actions()
    }

    fn trunk_out_dim(&self) -> usize {
        self.trunk.last().map_or(self.input_dim, |l| l.out_dim)
    }

    /// Every layer in parameter order: trunk, then head (value before advantage).
    pub fn layers(&self) -> Vec<LayerSpec> {
        let mut layers = self.trunk.clone();
        let feat = self.trunk_out_dim();
        let out = |out_dim| LayerSpec { kind: self.head_kind, in_dim: feat, out_dim, activation: Activation::Identity };
        match self.head {
            Head::Single { num_actions } => layers.push(out(num_actions)),
            Head::Dueling { num_actions } => {
                layers.push(out(1));
                layers.push(out(num_actions));
            }
        }
        layers
    }

    /// Index of the advantage layer of a dueling head.
    pub fn advantage_layer(&self) -> Option<usize> {
        match self.head {
            Head::Dueling { .. } => Some(self.trunk.len() + 1),
            Head::Single { .. } => None,
        }
    }

    pub fn has_noisy(&self) -> bool {
        self.layers().iter().any(|l| l.kind == LayerKind::Noisy)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.num_actions() == 0 {
            return Err(Error::Config("network input and output sizes must be positive".into()));
        }
        let mut prev = self.input_dim;
        for (i, l) in self.trunk.iter().enumerate() {
            if l.in_dim != prev || l.out_dim == 0 {
                return Err(Error::Config(format!("trunk layer {i} expects input {} but receives {prev}", l.in_dim)));
            }
            prev = l.out_dim;
        }
        Ok(())
    }
}
