//! JSON checkpoints: a flat list of named tensors with their shapes.
//!
//! ```json
//! {"tensors": [{"name": "layer0.weight", "shape": [64, 23], "data": [...]}, ...]}
//! ```
//!
//! Per layer `i` the names are `layer{i}.weight` (row-major, `out x in`),
//! `layer{i}.bias`, and for noisy layers `layer{i}.sigma_weight` and
//! `layer{i}.sigma_bias`. Optimizer moments are not stored.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::params::{LayerParams, NetworkParams};
use super::spec::NetworkSpec;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn from_params(params: &NetworkParams) -> Self {
        let mut tensors = Vec::new();
        for (i, l) in params.layers.iter().enumerate() {
            let mat = |name: &str, a: &Array2<f64>| NamedTensor {
                name: format!("layer{i}.{name}"),
                shape: a.shape().to_vec(),
                data: a.iter().copied().collect(),
            };
            let vec = |name: &str, a: &Array1<f64>| NamedTensor {
                name: format!("layer{i}.{name}"),
                shape: a.shape().to_vec(),
                data: a.to_vec(),
            };
            tensors.push(mat("weight", &l.weight));
            tensors.push(vec("bias", &l.bias));
            if let Some(s) = &l.sigma_weight {
                tensors.push(mat("sigma_weight", s));
            }
            if let Some(s) = &l.sigma_bias {
                tensors.push(vec("sigma_bias", s));
            }
        }
        Self { tensors }
    }

    fn take(&self, name: &str) -> Option<&NamedTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    fn matrix(&self, name: &str) -> Result<Array2<f64>> {
        let t = self.take(name).ok_or_else(|| Error::Config(format!("checkpoint lacks {name}")))?;
        let [rows, cols] = t.shape[..] else {
            return Err(Error::Config(format!("{name} is not a matrix")));
        };
        Array2::from_shape_vec((rows, cols), t.data.clone()).map_err(|e| Error::Config(format!("{name}: {e}")))
    }

    fn vector(&self, name: &str) -> Result<Array1<f64>> {
        let t = self.take(name).ok_or_else(|| Error::Config(format!("checkpoint lacks {name}")))?;
        if t.shape != [t.data.len()] {
            return Err(Error::Config(format!("{name} has inconsistent shape")));
        }
        Ok(Array1::from(t.data.clone()))
    }

    /// Rebuilds parameters for `spec`, with fresh optimizer state.
    pub fn to_params(&self, spec: &NetworkSpec) -> Result<NetworkParams> {
        let mut layers = Vec::new();
        for (i, ls) in spec.layers().iter().enumerate() {
            let noisy = ls.kind == super::LayerKind::Noisy;
            layers.push(LayerParams {
                weight: self.matrix(&format!("layer{i}.weight"))?,
                bias: self.vector(&format!("layer{i}.bias"))?,
                sigma_weight: noisy.then(|| self.matrix(&format!("layer{i}.sigma_weight"))).transpose()?,
                sigma_bias: noisy.then(|| self.vector(&format!("layer{i}.sigma_bias"))).transpose()?,
            });
        }
        let params = NetworkParams::from_layers(layers);
        params.check_shapes(spec).map_err(|e| Error::Config(format!("checkpoint: {e}")))?;
        Ok(params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        serde_json::to_writer(BufWriter::new(File::create(path)?), self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Head, DEFAULT_SIGMA0};
    use rand::SeedableRng;

    #[test]
    fn round_trip_through_file() {
        let spec = NetworkSpec::mlp(5, &[7, 6], Head::Dueling { num_actions: 3 }, true);
        let mut rng = crate::seed::Rng::seed_from_u64(11);
        let params = NetworkParams::init(&spec, DEFAULT_SIGMA0, &mut rng);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.json");
        Checkpoint::from_params(&params).save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap().to_params(&spec).unwrap();
        assert!(back.weights_equal(&params));
    }

    #[test]
    fn wrong_spec_is_rejected() {
        let spec = NetworkSpec::mlp(5, &[7], Head::Single { num_actions: 3 }, false);
        let mut rng = crate::seed::Rng::seed_from_u64(12);
        let ck = Checkpoint::from_params(&NetworkParams::init(&spec, DEFAULT_SIGMA0, &mut rng));
        let other = NetworkSpec::mlp(5, &[8], Head::Single { num_actions: 3 }, false);
        assert!(ck.to_params(&other).is_err());
    }
}
