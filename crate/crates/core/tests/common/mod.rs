//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, Poisson};
use resalloc_core::agent::Agent;
use resalloc_core::nn::{
    backward, forward, Activation, Head, LayerKind, LayerParams, LayerSpec, NetworkParams, NetworkSpec, NoiseSample,
};
use resalloc_core::{EnvConfig, Transition};

const FREE: u8 = 0;
const HELD: u8 = 1;
const COOL: u8 = 2;

/// Step-by-step re-simulation of the environment dynamics with flat arrays.
pub struct OracleEnv {
    cfg: EnvConfig,
    kind: Vec<u8>,
    rem: Vec<u32>,
    owner: Vec<u64>,
    queue: Vec<(u64, u32)>,
    t: u32,
    next_id: u64,
    rng: ChaCha8Rng,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleStep {
    pub reward: f64,
    pub unutilized: usize,
    pub items_performing: usize,
    pub resources_utilized: usize,
    pub queue_len: usize,
    pub dropped: usize,
}

impl OracleEnv {
    pub fn new(cfg: EnvConfig, seed: u64) -> Self {
        let m = cfg.num_resources;
        Self {
            cfg,
            kind: vec![FREE; m],
            rem: vec![0; m],
            owner: vec![0; m],
            queue: Vec::new(),
            t: 0,
            next_id: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn step(&mut self, action: usize) -> OracleStep {
        let m = self.cfg.num_resources;

        // Allocate.
        let p = 1.0 / (1.0 + self.cfg.mean_hold - f64::from(self.cfg.min_hold));
        let geo = Geometric::new(p).unwrap();
        let mut placed = 0;
        let mut i = 0;
        while i < self.queue.len() {
            let (id, eligible_at) = self.queue[i];
            if placed < action && eligible_at <= self.t {
                if let Some(s) = (0..m).find(|&s| self.kind[s] == FREE) {
                    let hold = self.cfg.min_hold + geo.sample(&mut self.rng) as u32;
                    self.kind[s] = HELD;
                    self.rem[s] = hold;
                    self.owner[s] = id;
                    self.queue.remove(i);
                    placed += 1;
                    continue;
                }
            }
            i += 1;
        }

        // Advance.
        for s in 0..m {
            if self.kind[s] != FREE {
                self.rem[s] -= 1;
                if self.rem[s] == 0 {
                    self.kind[s] = FREE;
                }
            }
        }
        let d = self.cfg.reallocation_delay;
        let mut front = Vec::new();
        for s in 0..m {
            if self.kind[s] == HELD && self.rng.random_bool(self.cfg.change_request_prob) {
                front.push((self.owner[s], self.t + 1 + d));
                if d == 0 {
                    self.kind[s] = FREE;
                } else {
                    self.kind[s] = COOL;
                    self.rem[s] = d;
                }
            }
        }
        front.append(&mut self.queue);
        self.queue = front;

        // Arrive.
        let mut dropped = 0;
        if self.cfg.arrival_rate > 0.0 {
            let n = Poisson::new(self.cfg.arrival_rate).unwrap().sample(&mut self.rng) as u64;
            for _ in 0..n {
                if self.queue.len() < self.cfg.max_queue {
                    self.queue.push((self.next_id, self.t + 1));
                    self.next_id += 1;
                } else {
                    dropped += 1;
                }
            }
        }

        // Score.
        let unutilized = self.kind.iter().filter(|&&k| k == FREE).count();
        let held = self.kind.iter().filter(|&&k| k == HELD).count();
        self.t += 1;
        OracleStep {
            reward: -((unutilized as f64) - (self.cfg.target_unutilized as f64)).abs(),
            unutilized,
            items_performing: held,
            resources_utilized: m - unutilized,
            queue_len: self.queue.len(),
            dropped,
        }
    }
}

/// Double-Q targets assembled element by element from the two Q matrices.
pub fn brute_force_targets(agent: &Agent, head: usize, batch: &[&Transition]) -> Vec<f64> {
    let h = &agent.heads()[head];
    let spec = agent.spec();
    let rows: Vec<f64> = batch.iter().flat_map(|t| t.next_state.iter().copied()).collect();
    let next = Array2::from_shape_vec((batch.len(), spec.input_dim), rows).unwrap();
    let qp = forward(&h.policy, spec, next.view(), None).unwrap();
    let qt = forward(&h.target, spec, next.view(), None).unwrap();
    let gamma = agent.config().gamma;
    let mut out = Vec::new();
    for (j, t) in batch.iter().enumerate() {
        let mut best = 0;
        for a in 1..qp.ncols() {
            if qp[[j, a]] > qp[[j, best]] {
                best = a;
            }
        }
        let y = if t.terminal { t.reward } else { t.reward + gamma * qt[[j, best]] };
        out.push(y);
    }
    out
}

/// Scalar forward pass of a plain (noise-free) network, used as a
/// tolerance-level cross-check of the batched implementation.
pub fn scalar_forward(params: &NetworkParams, dueling: bool, input: &[f64]) -> Vec<f64> {
    let affine = |l: &LayerParams, x: &[f64]| -> Vec<f64> {
        (0..l.weight.nrows()).map(|o| l.bias[o] + (0..x.len()).map(|i| l.weight[[o, i]] * x[i]).sum::<f64>()).collect()
    };
    let n = params.layers.len();
    let head_layers = if dueling { 2 } else { 1 };
    let mut h = input.to_vec();
    for l in &params.layers[..n - head_layers] {
        h = affine(l, &h).into_iter().map(|v| v.max(0.0)).collect();
    }
    if dueling {
        let v = affine(&params.layers[n - 2], &h)[0];
        let a = affine(&params.layers[n - 1], &h);
        let mean = a.iter().sum::<f64>() / a.len() as f64;
        a.iter().map(|x| v + x - mean).collect()
    } else {
        affine(&params.layers[n - 1], &h)
    }
}

pub fn random_transition<R: Rng>(rng: &mut R, dim: usize, actions: usize) -> Transition {
    Transition {
        state: (0..dim).map(|_| rng.random::<f64>()).collect(),
        action: rng.random_range(0..actions),
        reward: -(rng.random_range(0..5) as f64),
        next_state: (0..dim).map(|_| rng.random::<f64>()).collect(),
        terminal: rng.random_bool(0.2),
    }
}

fn kind<R: Rng>(rng: &mut R) -> LayerKind {
    if rng.random_bool(0.5) {
        LayerKind::Noisy
    } else {
        LayerKind::Linear
    }
}

/// Small network with a random mix of plain and noisy layers and either head.
pub fn random_spec<R: Rng>(rng: &mut R) -> NetworkSpec {
    let input_dim = rng.random_range(1..6);
    let depth = rng.random_range(0..3);
    let mut trunk = Vec::new();
    let mut prev = input_dim;
    for _ in 0..depth {
        let out = rng.random_range(1..8);
        trunk.push(LayerSpec { kind: kind(rng), in_dim: prev, out_dim: out, activation: Activation::Relu });
        prev = out;
    }
    let num_actions = rng.random_range(1..5);
    let head = if rng.random_bool(0.5) { Head::Dueling { num_actions } } else { Head::Single { num_actions } };
    NetworkSpec { input_dim, trunk, head, head_kind: kind(rng) }
}

/// Relative error `|a - n| / (|a| + |n|)` between analytic gradients of
/// `sum(G * Q)` and central differences with step `h`, over every parameter
/// of one random network. Entries where both sides are below `1e-7` in
/// magnitude count as matching.
pub fn gradient_check(seed: u64, h: f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = random_spec(&mut rng);
    let mut params = NetworkParams::init(&spec, 0.5, &mut rng);
    // Raise sigma so the noise terms carry real weight in the check.
    for l in &mut params.layers {
        if let Some(s) = l.sigma_weight.as_mut() {
            s.mapv_inplace(|_| rng.random_range(-0.5..0.5));
        }
        if let Some(s) = l.sigma_bias.as_mut() {
            s.mapv_inplace(|_| rng.random_range(-0.5..0.5));
        }
    }
    let batch = rng.random_range(1..5);
    let input = Array2::from_shape_fn((batch, spec.input_dim), |_| rng.random_range(-1.0..1.0));
    let g = Array2::from_shape_fn((batch, spec.num_actions()), |_| rng.random_range(-1.0..1.0));
    let noise = rng.random_bool(0.7).then(|| NoiseSample::sample(&spec, &mut rng));
    let objective = |p: &NetworkParams| (forward(p, &spec, input.view(), noise.as_ref()).unwrap() * &g).sum();
    let grads = backward(&params, &spec, input.view(), noise.as_ref(), g.view()).unwrap();

    let mut worst: f64 = 0.0;
    for li in 0..params.layers.len() {
        let analytic: Vec<Vec<f64>> = grads.layers[li].tensors().iter().map(|t| t.to_vec()).collect();
        for (ti, tensor) in analytic.iter().enumerate() {
            for (k, &a) in tensor.iter().enumerate() {
                let orig = params.layers[li].tensors()[ti][k];
                params.layers[li].tensors_mut()[ti][k] = orig + h;
                let up = objective(&params);
                params.layers[li].tensors_mut()[ti][k] = orig - h;
                let down = objective(&params);
                params.layers[li].tensors_mut()[ti][k] = orig;
                let n = (up - down) / (2.0 * h);
                if a.abs() < 1e-7 && n.abs() < 1e-7 {
                    continue;
                }
                worst = worst.max((a - n).abs() / (a.abs() + n.abs()));
            }
        }
    }
    worst
}

/// p-value of Pearson's chi-square goodness-of-fit of `counts` against
/// the proportions `weights / sum(weights)`.
pub fn chi_square_p(counts: &[u64], weights: &[f64]) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    let n: u64 = counts.iter().sum();
    let total: f64 = weights.iter().sum();
    let stat: f64 = counts
        .iter()
        .zip(weights)
        .map(|(&c, &w)| {
            let expected = n as f64 * w / total;
            (c as f64 - expected).powi(2) / expected
        })
        .sum();
    let dof = (counts.len() - 1) as f64;
    1.0 - ChiSquared::new(dof).unwrap().cdf(stat)
}

/// Priorities drawn by stratified sampling, counted per slot.
pub fn prioritized_counts(
    mem: &resalloc_core::replay::PrioritizedMemory,
    draws: usize,
    batch: usize,
    seed: u64,
) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; mem.len()];
    for _ in 0..draws / batch {
        for s in mem.sample(batch, 0.4, &mut rng).unwrap() {
            counts[s.slot] += 1;
        }
    }
    counts
}

pub fn dummy_transition(tag: usize) -> Transition {
    Transition { state: vec![tag as f64], action: tag, reward: -(tag as f64), next_state: vec![0.0], terminal: false }
}
