//! Deep Q-learning agents built from orthogonal switches: double targets
//! (always on), dueling head, noisy layers, prioritized replay and bagging.

mod config;

pub use config::{AgentConfig, AgentOverrides, Aggregator, EpsilonSchedule, Switches, Variant};

use std::path::Path;

use ndarray::{Array2, ArrayView1};
use rand::Rng as _;

use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::nn::{
    adam_step, argmax, backward_from_cache, forward, forward_cached, forward_one, Checkpoint, Head, NetworkParams,
    NetworkSpec, NoiseSample,
};
use crate::replay::{BootstrapMemory, PrioritizedMemory, Transition, UniformMemory};
use crate::seed::{self, Rng};

/// Policy network and its periodically synchronized target copy.
#[derive(Debug, Clone)]
pub struct QHead {
    pub policy: NetworkParams,
    pub target: NetworkParams,
}

#[derive(Debug, Clone)]
pub enum Memory {
    Uniform(UniformMemory),
    Prioritized(PrioritizedMemory),
    Bootstrap(BootstrapMemory),
}

impl Memory {
    pub fn len(&self) -> usize {
        match self {
            Memory::Uniform(m) => m.len(),
            Memory::Prioritized(m) => m.len(),
            Memory::Bootstrap(m) => m.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, slot: usize) -> &Transition {
        match self {
            Memory::Uniform(m) => m.get(slot),
            Memory::Prioritized(m) => m.get(slot),
            Memory::Bootstrap(m) => m.get(slot),
        }
    }

    pub fn write_log<W: std::io::Write>(&self, w: W) -> Result<()> {
        match self {
            Memory::Uniform(m) => m.write_log(w),
            Memory::Prioritized(m) => m.write_log(w),
            Memory::Bootstrap(m) => m.write_log(w),
        }
    }
}

/// Exploration statistics accumulated over training-mode action selections.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ExplorationStats {
    pub selections: u64,
    pub epsilon_sum: f64,
    pub noise_magnitude_sum: f64,
    pub disagreement_sum: f64,
}

impl ExplorationStats {
    fn mean(&self, sum: f64) -> f64 {
        if self.selections == 0 {
            0.0
        } else {
            sum / self.selections as f64
        }
    }

    pub fn mean_epsilon(&self) -> f64 {
        self.mean(self.epsilon_sum)
    }

    pub fn mean_noise_magnitude(&self) -> f64 {
        self.mean(self.noise_magnitude_sum)
    }

    pub fn mean_disagreement(&self) -> f64 {
        self.mean(self.disagreement_sum)
    }
}

/// Picks one action from per-head proposals.
pub fn aggregate_votes(proposals: &[usize], mode: Aggregator, rng: &mut Rng) -> Result<usize> {
    if proposals.is_empty() {
        return Err(Error::Contract("no proposals to aggregate".into()));
    }
    match mode {
        Aggregator::MajorityVote => {
            let max_action = *proposals.iter().max().expect("non-empty");
            let mut counts = vec![0usize; max_action + 1];
            for &a in proposals {
                counts[a] += 1;
            }
            // First maximum wins, so ties go to the lowest action.
            let mut best = 0;
            for (a, &c) in counts.iter().enumerate() {
                if c > counts[best] {
                    best = a;
                }
            }
            Ok(best)
        }
        Aggregator::RandomHead => Ok(proposals[rng.random_range(0..proposals.len())]),
    }
}

fn huber(delta: f64, kappa: f64) -> f64 {
    if delta.abs() <= kappa {
        0.5 * delta * delta
    } else {
        kappa * (delta.abs() - 0.5 * kappa)
    }
}

fn huber_grad(delta: f64, kappa: f64) -> f64 {
    delta.clamp(-kappa, kappa)
}

fn stack<'a>(rows: impl ExactSizeIterator<Item = &'a [f64]>, width: usize) -> Result<Array2<f64>> {
    let n = rows.len();
    let mut flat = Vec::with_capacity(n * width);
    for r in rows {
        if r.len() != width {
            return Err(Error::Contract(format!("observation length {} but network expects {width}", r.len())));
        }
        flat.extend_from_slice(r);
    }
    Ok(Array2::from_shape_vec((n, width), flat).expect("rows checked"))
}

/// Outcome of one gradient step on one head.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    pub loss: f64,
    pub td_errors: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Agent {
    variant: Option<Variant>,
    config: AgentConfig,
    spec: NetworkSpec,
    heads: Vec<QHead>,
    memory: Memory,
    rng: Rng,
    mask_rng: Rng,
    env_steps: u64,
    learn_steps: u64,
    epsilon_consults: u64,
    stats: ExplorationStats,
}

/// Builds the agent for a numbered variant; `overrides` replace defaults.
pub fn make_agent(variant_id: u8, env: &EnvConfig, overrides: &AgentOverrides) -> Result<Agent> {
    let variant = Variant::from_id(variant_id)?;
    let mut cfg = AgentConfig::for_variant(variant);
    overrides.apply(&mut cfg);
    cfg.seed = env.seed;
    let mut agent = Agent::new(cfg, env)?;
    agent.variant = Some(variant);
    Ok(agent)
}

impl Agent {
    pub fn new(config: AgentConfig, env: &EnvConfig) -> Result<Self> {
        config.validate()?;
        env.validate()?;
        let num_actions = env.num_actions();
        let head = if config.switches.dueling { Head::Dueling { num_actions } } else { Head::Single { num_actions } };
        let spec = NetworkSpec::mlp(env.observation_len(), &config.hidden, head, config.switches.noisy);
        spec.validate()?;

        let heads = (0..config.heads())
            .map(|k| {
                let mut init_rng = seed::rng(config.seed, seed::TAG_HEAD_INIT, k as u64);
                let policy = NetworkParams::init(&spec, config.sigma0, &mut init_rng);
                QHead { target: policy.clone_params(), policy }
            })
            .collect();

        let memory = if config.switches.bagging {
            Memory::Bootstrap(BootstrapMemory::new(config.replay_capacity, config.heads(), config.p_mask)?)
        } else if config.switches.prioritized {
            Memory::Prioritized(PrioritizedMemory::new(config.replay_capacity, config.per_alpha, config.per_eps))
        } else {
            Memory::Uniform(UniformMemory::new(config.replay_capacity))
        };

        Ok(Self {
            variant: None,
            rng: seed::rng(config.seed, seed::TAG_AGENT, 0),
            mask_rng: seed::rng(config.seed, seed::TAG_MASK, 0),
            config,
            spec,
            heads,
            memory,
            env_steps: 0,
            learn_steps: 0,
            epsilon_consults: 0,
            stats: ExplorationStats::default(),
        })
    }

    pub fn variant(&self) -> Option<Variant> {
        self.variant
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn heads(&self) -> &[QHead] {
        &self.heads
    }

    pub fn heads_mut(&mut self) -> &mut [QHead] {
        &mut self.heads
    }

    pub fn memory(&self) -> &Memory {
        &self.memory
    }

    pub fn learn_steps(&self) -> u64 {
        self.learn_steps
    }

    pub fn env_steps(&self) -> u64 {
        self.env_steps
    }

    /// How often the epsilon-greedy branch has been entered.
    pub fn epsilon_consults(&self) -> u64 {
        self.epsilon_consults
    }

    pub fn epsilon(&self) -> f64 {
        self.config.epsilon.value(self.env_steps)
    }

    /// Returns and resets the exploration statistics.
    pub fn take_exploration_stats(&mut self) -> ExplorationStats {
        std::mem::take(&mut self.stats)
    }

    /// Q values of head `k`'s policy net with no noise.
    pub fn q_values(&self, head: usize, observation: &[f64]) -> Result<Vec<f64>> {
        Ok(forward_one(&self.heads[head].policy, &self.spec, observation, None)?.to_vec())
    }

    fn proposals(
        &self,
        observation: &[f64],
        training: bool,
        rng: &mut Rng,
        stats: Option<&mut ExplorationStats>,
    ) -> Result<Vec<usize>> {
        let mut noise_mag = 0.0;
        let mut out = Vec::with_capacity(self.heads.len());
        for head in &self.heads {
            let noise = (self.config.switches.noisy && training).then(|| NoiseSample::sample(&self.spec, rng));
            if let Some(n) = &noise {
                noise_mag += n.perturbation_magnitude(&head.policy);
            }
            let q = forward_one(&head.policy, &self.spec, observation, noise.as_ref())?;
            if q.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric("non-finite Q value during action selection".into()));
            }
            out.push(argmax(q.view()));
        }
        if let Some(stats) = stats {
            stats.noise_magnitude_sum += noise_mag / self.heads.len() as f64;
        }
        Ok(out)
    }

    fn combine(&self, proposals: &[usize], rng: &mut Rng) -> Result<usize> {
        if self.config.switches.bagging {
            aggregate_votes(proposals, self.config.aggregator, rng)
        } else {
            Ok(proposals[0])
        }
    }

    /// Action for `observation`. Training mode explores (epsilon-greedy, or
    /// fresh noise for noisy variants); evaluation is greedy and noise-free.
    pub fn select_action(&mut self, observation: &[f64], training: bool) -> Result<usize> {
        if observation.len() != self.spec.input_dim {
            return Err(Error::Contract(format!(
                "observation length {} but network expects {}",
                observation.len(),
                self.spec.input_dim
            )));
        }
        let mut rng = self.rng.clone();
        let result = self.select_with(observation, training, &mut rng);
        self.rng = rng;
        result
    }

    fn select_with(&mut self, observation: &[f64], training: bool, rng: &mut Rng) -> Result<usize> {
        let num_actions = self.spec.num_actions();
        let mut stats = self.stats;
        if training {
            stats.selections += 1;
        }
        if training && !self.config.switches.noisy {
            self.epsilon_consults += 1;
            let eps = self.epsilon();
            stats.epsilon_sum += eps;
            if rng.random::<f64>() < eps {
                self.stats = stats;
                return Ok(rng.random_range(0..num_actions));
            }
        }
        let proposals = self.proposals(observation, training, rng, training.then_some(&mut stats))?;
        let action = self.combine(&proposals, rng)?;
        if training {
            let disagree = proposals.iter().filter(|&&a| a != action).count();
            stats.disagreement_sum += disagree as f64 / proposals.len() as f64;
            self.stats = stats;
        }
        Ok(action)
    }

    /// Greedy, noise-free action that leaves the agent untouched; `rng` is
    /// only consulted by the random-head aggregator.
    pub fn greedy_action(&self, observation: &[f64], rng: &mut Rng) -> Result<usize> {
        let proposals = self.proposals(observation, false, rng, None)?;
        self.combine(&proposals, rng)
    }

    /// Stores a transition in replay memory.
    pub fn observe(&mut self, transition: Transition) {
        self.env_steps += 1;
        match &mut self.memory {
            Memory::Uniform(m) => {
                m.push(transition);
            }
            Memory::Prioritized(m) => {
                m.push(transition);
            }
            Memory::Bootstrap(m) => {
                m.push(transition, &mut self.mask_rng);
            }
        }
    }

    /// Double-Q targets `r + gamma * (1 - terminal) * Q_target(s', argmax_a Q_policy(s', a))`
    /// for head `head`, evaluated without noise.
    pub fn compute_targets(&self, head: usize, batch: &[&Transition]) -> Result<Vec<f64>> {
        if batch.is_empty() {
            return Err(Error::Contract("empty batch".into()));
        }
        let h = self.heads.get(head).ok_or_else(|| Error::Contract(format!("no head {head}")))?;
        let next = stack(batch.iter().map(|t| t.next_state.as_slice()), self.spec.input_dim)?;
        let q_policy = forward(&h.policy, &self.spec, next.view(), None)?;
        let q_target = forward(&h.target, &self.spec, next.view(), None)?;
        let mut out = Vec::with_capacity(batch.len());
        for (j, t) in batch.iter().enumerate() {
            let best = argmax(q_policy.row(j));
            let bootstrap = if t.terminal { 0.0 } else { self.config.gamma * q_target[[j, best]] };
            let y = t.reward + bootstrap;
            if !y.is_finite() {
                return Err(Error::Numeric(format!("non-finite target for batch element {j}")));
            }
            out.push(y);
        }
        Ok(out)
    }

    /// One weighted Huber regression step of head `head` towards `targets`.
    pub fn fit_batch(
        &mut self,
        head: usize,
        batch: &[&Transition],
        targets: &[f64],
        weights: Option<&[f64]>,
        noise: Option<&NoiseSample>,
    ) -> Result<FitOutcome> {
        let n = batch.len();
        if n == 0 || targets.len() != n || weights.is_some_and(|w| w.len() != n) {
            return Err(Error::Contract("batch, targets and weights must have equal non-zero length".into()));
        }
        let kappa = self.config.huber_delta;
        let states = stack(batch.iter().map(|t| t.state.as_slice()), self.spec.input_dim)?;
        let h = &mut self.heads[head];
        let cache = forward_cached(&h.policy, &self.spec, states.view(), noise)?;
        let mut out_grad = Array2::zeros(cache.q.dim());
        let mut loss = 0.0;
        let mut td_errors = Vec::with_capacity(n);
        for (j, t) in batch.iter().enumerate() {
            if t.action >= self.spec.num_actions() {
                return Err(Error::Contract(format!("stored action {} out of range", t.action)));
            }
            let w = weights.map_or(1.0, |w| w[j]);
            let delta = targets[j] - cache.q[[j, t.action]];
            loss += w * huber(delta, kappa);
            out_grad[[j, t.action]] = -w * huber_grad(delta, kappa) / n as f64;
            td_errors.push(delta);
        }
        loss /= n as f64;
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("non-finite loss at learn step {}", self.learn_steps + 1)));
        }
        let grads = backward_from_cache(&h.policy, &self.spec, &cache, out_grad.view())?;
        adam_step(&mut h.policy, &grads, &self.config.optimizer)?;
        Ok(FitOutcome { loss, td_errors })
    }

    /// Samples a batch per head, takes one gradient step on each, and copies
    /// policy into target every `target_sync_period` learn steps. Returns the
    /// mean loss over heads, or `None` before warm-up (or when some head has
    /// too few masked transitions).
    pub fn learn_step(&mut self) -> Result<Option<f64>> {
        let warm = self.config.warmup.max(self.config.batch_size);
        if self.memory.len() < warm {
            return Ok(None);
        }
        let batch_size = self.config.batch_size;
        let mut total = 0.0;
        let mut trained = 0;
        for k in 0..self.heads.len() {
            let (slots, weights) = match &self.memory {
                Memory::Uniform(m) => (m.sample_uniform(batch_size, &mut self.rng), None),
                Memory::Bootstrap(m) => (m.sample_for_head(k, batch_size, &mut self.rng), None),
                Memory::Prioritized(m) => {
                    let beta = self.config.per_beta(self.env_steps);
                    match m.sample(batch_size, beta, &mut self.rng) {
                        Some(s) => {
                            let slots = s.iter().map(|p| p.slot).collect();
                            let w: Vec<f64> = s.iter().map(|p| p.weight).collect();
                            (Some(slots), Some(w))
                        }
                        None => (None, None),
                    }
                }
            };
            let Some(slots) = slots else { continue };
            let noise = self.config.switches.noisy.then(|| NoiseSample::sample(&self.spec, &mut self.rng));
            let batch: Vec<Transition> = slots.iter().map(|&s| self.memory.get(s).clone()).collect();
            let refs: Vec<&Transition> = batch.iter().collect();
            let targets = self.compute_targets(k, &refs)?;
            let fit = self.fit_batch(k, &refs, &targets, weights.as_deref(), noise.as_ref())?;
            if let Memory::Prioritized(m) = &mut self.memory {
                m.update_priorities(&slots, &fit.td_errors)?;
            }
            total += fit.loss;
            trained += 1;
        }
        if trained == 0 {
            return Ok(None);
        }
        self.learn_steps += 1;
        if self.learn_steps.is_multiple_of(self.config.target_sync_period) {
            self.sync_targets();
        }
        Ok(Some(total / trained as f64))
    }

    /// Copies every policy network into its target.
    pub fn sync_targets(&mut self) {
        for h in &mut self.heads {
            h.target = h.policy.clone_params();
        }
    }

    /// Writes `head{k}_policy.json` and `head{k}_target.json` for every head.
    pub fn save_checkpoints(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (k, h) in self.heads.iter().enumerate() {
            Checkpoint::from_params(&h.policy).save(&dir.join(format!("head{k}_policy.json")))?;
            Checkpoint::from_params(&h.target).save(&dir.join(format!("head{k}_target.json")))?;
        }
        Ok(())
    }

    pub fn load_checkpoints(&mut self, dir: &Path) -> Result<()> {
        for (k, h) in self.heads.iter_mut().enumerate() {
            h.policy = Checkpoint::load(&dir.join(format!("head{k}_policy.json")))?.to_params(&self.spec)?;
            h.target = Checkpoint::load(&dir.join(format!("head{k}_target.json")))?.to_params(&self.spec)?;
        }
        Ok(())
    }
}

/// Plain Bellman target `r + gamma * max_a q_next[a]`, masked on terminal.
pub fn bellman_target(reward: f64, gamma: f64, terminal: bool, q_next: ArrayView1<f64>) -> f64 {
    if terminal {
        reward
    } else {
        reward + gamma * q_next.fold(f64::NEG_INFINITY, |m, &v| m.max(v))
    }
}
