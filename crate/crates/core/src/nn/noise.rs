use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;

use super::params::NetworkParams;
use super::spec::{LayerKind, NetworkSpec};

/// `f(x) = sign(x) * sqrt(|x|)`.
pub fn noise_fn(x: f64) -> f64 {
    x.signum() * x.abs().sqrt()
}

/// Factorized noise for one layer: one vector over inputs, one over outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorNoise {
    pub eps_in: Array1<f64>,
    pub eps_out: Array1<f64>,
}

impl FactorNoise {
    pub fn f_in(&self) -> Array1<f64> {
        self.eps_in.mapv(noise_fn)
    }

    pub fn f_out(&self) -> Array1<f64> {
        self.eps_out.mapv(noise_fn)
    }

    /// Rank-one matrix `f(eps_out) f(eps_in)^T`, shaped `out x in`.
    pub fn outer(&self) -> Array2<f64> {
        let f_out = self.f_out().insert_axis(Axis(1));
        let f_in = self.f_in().insert_axis(Axis(0));
        f_out.dot(&f_in)
    }
}

/// One draw of noise for every noisy layer of a network; `None` for plain layers.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSample {
    pub layers: Vec<Option<FactorNoise>>,
}

impl NoiseSample {
    /// Draws standard-normal factors for every noisy layer, in layer order,
    /// input vector before output vector.
    pub fn sample<R: Rng + ?Sized>(spec: &NetworkSpec, rng: &mut R) -> Self {
        let layers = spec
            .layers()
            .iter()
            .map(|l| {
                (l.kind == LayerKind::Noisy).then(|| {
                    let eps_in = Array1::from_shape_fn(l.in_dim, |_| rng.sample(StandardNormal));
                    let eps_out = Array1::from_shape_fn(l.out_dim, |_| rng.sample(StandardNormal));
                    FactorNoise { eps_in, eps_out }
                })
            })
            .collect();
        Self { layers }
    }

    /// All-zero factors; equivalent to running without noise.
    pub fn zeros(spec: &NetworkSpec) -> Self {
        let layers = spec
            .layers()
            .iter()
            .map(|l| {
                (l.kind == LayerKind::Noisy)
                    .then(|| FactorNoise { eps_in: Array1::zeros(l.in_dim), eps_out: Array1::zeros(l.out_dim) })
            })
            .collect();
        Self { layers }
    }

    /// Mean absolute entry of the weight perturbation `sigma_W * (f_out f_in^T)`,
    /// averaged over noisy layers. Zero when the network has no noisy layers.
    pub fn perturbation_magnitude(&self, params: &NetworkParams) -> f64 {
        let mut total = 0.0;
        let mut count = 0;
        for (noise, layer) in self.layers.iter().zip(&params.layers) {
            if let (Some(noise), Some(sigma)) = (noise, &layer.sigma_weight) {
                let pert = sigma * &noise.outer();
                total += pert.mapv(f64::abs).mean().unwrap_or(0.0);
                count += 1;
            }
        }
        if count == 0 {
            0.0
        } else {
            total / count as f64
        }
    }
}
