//! Discrete-time resource-allocation simulator.
//!
//! `M` resources serve a fluctuating population of items. Each step runs five
//! phases in a fixed order: allocate, advance, arrive, score, tick. The agent's
//! action is the number of waiting items it wants placed this step.

use std::collections::{HashSet, VecDeque};
use std::io::Write;
use std::ops::Deref;

use rand::Rng as _;
use rand::SeedableRng;
use rand_distr::{Distribution, Geometric, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub num_resources: usize,
    pub target_unutilized: usize,
    /// Mean number of new items per step (Poisson).
    pub arrival_rate: f64,
    pub mean_hold: f64,
    pub min_hold: u32,
    pub change_request_prob: f64,
    pub reallocation_delay: u32,
    pub max_queue: usize,
    pub episode_length: u32,
    pub seed: u64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            num_resources: 10,
            target_unutilized: 2,
            arrival_rate: 1.5,
            mean_hold: 10.0,
            min_hold: 3,
            change_request_prob: 0.05,
            reallocation_delay: 2,
            max_queue: 50,
            episode_length: 100,
            seed: 0,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.num_resources == 0 {
            return fail("num_resources must be positive".into());
        }
        if self.target_unutilized >= self.num_resources {
            return fail(format!(
                "target_unutilized ({}) must be below num_resources ({})",
                self.target_unutilized, self.num_resources
            ));
        }
        if self.min_hold < 1 {
            return fail("min_hold must be at least 1".into());
        }
        if !self.mean_hold.is_finite() || self.mean_hold < f64::from(self.min_hold) {
            return fail(format!(
                "mean_hold ({}) must be finite and at least min_hold ({})",
                self.mean_hold, self.min_hold
            ));
        }
        if !self.arrival_rate.is_finite() || self.arrival_rate < 0.0 {
            return fail(format!("arrival_rate ({}) must be finite and non-negative", self.arrival_rate));
        }
        if !(0.0..=1.0).contains(&self.change_request_prob) {
            return fail(format!("change_request_prob ({}) must lie in [0, 1]", self.change_request_prob));
        }
        if self.max_queue == 0 {
            return fail("max_queue must be positive".into());
        }
        if self.episode_length == 0 {
            return fail("episode_length must be positive".into());
        }
        Ok(())
    }

    /// Length of the observation vector, `2M + 3`.
    pub fn observation_len(&self) -> usize {
        2 * self.num_resources + 3
    }

    /// Number of discrete actions, `M + 1` (allocate 0..=M items).
    pub fn num_actions(&self) -> usize {
        self.num_resources + 1
    }

    pub fn reward_for(&self, unutilized: usize) -> f64 {
        -(unutilized as f64 - self.target_unutilized as f64).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResourceSlot {
    Free,
    Held { item: u64, remaining: u32 },
    Cooldown { remaining: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WaitingItem {
    pub item_id: u64,
    /// First step at which the item may be allocated.
    pub eligible_at: u32,
}

/// Fixed-length observation in `[0, 1]^(2M+3)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation(pub Vec<f64>);

impl Deref for Observation {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StepInfo {
    pub unutilized: usize,
    pub items_performing: usize,
    pub resources_utilized: usize,
    /// Arrivals dropped this step because the queue was full.
    pub dropped_arrivals: usize,
    pub queue_len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    /// Set when the step counter reaches the episode length. This is a time
    /// limit, not a true terminal state.
    pub terminal: bool,
    pub info: StepInfo,
}

#[derive(Debug, Clone)]
pub struct ResourceEnv {
    config: EnvConfig,
    slots: Vec<ResourceSlot>,
    queue: VecDeque<WaitingItem>,
    step: u32,
    next_item: u64,
    rng: Rng,
    hold_extra: Geometric,
    arrivals: Option<Poisson<f64>>,
}

impl ResourceEnv {
    /// Builds an environment and resets it with `config.seed`.
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        let extra_mean = config.mean_hold - f64::from(config.min_hold);
        let hold_extra =
            Geometric::new(1.0 / (1.0 + extra_mean)).map_err(|e| Error::Config(format!("hold distribution: {e}")))?;
        let arrivals = if config.arrival_rate > 0.0 {
            Some(Poisson::new(config.arrival_rate).map_err(|e| Error::Config(format!("arrival distribution: {e}")))?)
        } else {
            None
        };
        let seed = config.seed;
        let mut env = Self {
            slots: vec![ResourceSlot::Free; config.num_resources],
            queue: VecDeque::new(),
            step: 0,
            next_item: 0,
            rng: Rng::seed_from_u64(seed),
            hold_extra,
            arrivals,
            config,
        };
        env.reset(seed);
        Ok(env)
    }

    /// Starts a fresh episode: every slot free, empty queue, step 0.
    pub fn reset(&mut self, seed: u64) -> Observation {
        self.slots.iter_mut().for_each(|s| *s = ResourceSlot::Free);
        self.queue.clear();
        self.step = 0;
        self.next_item = 0;
        self.rng = Rng::seed_from_u64(seed);
        self.observation()
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn slots(&self) -> &[ResourceSlot] {
        &self.slots
    }

    pub fn queue(&self) -> &VecDeque<WaitingItem> {
        &self.queue
    }

    pub fn current_step(&self) -> u32 {
        self.step
    }

    pub fn is_done(&self) -> bool {
        self.step >= self.config.episode_length
    }

    pub fn unutilized(&self) -> usize {
        self.slots.iter().filter(|s| matches!(s, ResourceSlot::Free)).count()
    }

    pub fn observation(&self) -> Observation {
        let cfg = &self.config;
        let mut obs = Vec::with_capacity(cfg.observation_len());
        for slot in &self.slots {
            let (occupied, remaining) = match *slot {
                ResourceSlot::Free => (0.0, 0),
                ResourceSlot::Held { remaining, .. } | ResourceSlot::Cooldown { remaining } => (1.0, remaining),
            };
            obs.push(occupied);
            obs.push((f64::from(remaining) / cfg.mean_hold).clamp(0.0, 1.0));
        }
        obs.push(self.queue.len().min(cfg.max_queue) as f64 / cfg.max_queue as f64);
        obs.push(self.unutilized() as f64 / cfg.num_resources as f64);
        obs.push(f64::from(self.step) / f64::from(cfg.episode_length));
        Observation(obs)
    }

    /// Advances the simulation by one step, placing up to `action` waiting items.
    pub fn step(&mut self, action: usize) -> Result<StepResult> {
        if self.is_done() {
            return Err(Error::State(format!("step called after the episode ended at step {}", self.step)));
        }
        if action > self.config.num_resources {
            return Err(Error::Contract(format!("action {action} outside [0, {}]", self.config.num_resources)));
        }
        self.allocate(action);
        self.advance();
        let dropped = self.arrive();

        let unutilized = self.unutilized();
        let items_performing = self.slots.iter().filter(|s| matches!(s, ResourceSlot::Held { .. })).count();
        let info = StepInfo {
            unutilized,
            items_performing,
            resources_utilized: self.config.num_resources - unutilized,
            dropped_arrivals: dropped,
            queue_len: self.queue.len(),
        };
        let reward = self.config.reward_for(unutilized);

        self.step += 1;
        Ok(StepResult { observation: self.observation(), reward, terminal: self.is_done(), info })
    }

    fn allocate(&mut self, budget: usize) {
        if budget == 0 {
            return;
        }
        let mut placed = 0;
        let mut kept = VecDeque::with_capacity(self.queue.len());
        while let Some(item) = self.queue.pop_front() {
            if placed < budget && item.eligible_at <= self.step {
                if let Some(idx) = self.slots.iter().position(|s| matches!(s, ResourceSlot::Free)) {
                    debug_assert!(item.eligible_at <= self.step, "allocated an item before it was eligible");
                    let hold = self.draw_hold();
                    self.slots[idx] = ResourceSlot::Held { item: item.item_id, remaining: hold };
                    placed += 1;
                    continue;
                }
            }
            kept.push_back(item);
        }
        self.queue = kept;
    }

    fn draw_hold(&mut self) -> u32 {
        let extra = self.hold_extra.sample(&mut self.rng);
        let extra = u32::try_from(extra).unwrap_or(u32::MAX / 2).min(u32::MAX / 2);
        self.config.min_hold + extra
    }

    fn advance(&mut self) {
        for slot in &mut self.slots {
            *slot = match *slot {
                ResourceSlot::Held { item, remaining } if remaining > 1 => {
                    ResourceSlot::Held { item, remaining: remaining - 1 }
                }
                ResourceSlot::Cooldown { remaining } if remaining > 1 => {
                    ResourceSlot::Cooldown { remaining: remaining - 1 }
                }
                _ => ResourceSlot::Free,
            };
        }

        let delay = self.config.reallocation_delay;
        let mut requeued = Vec::new();
        for idx in 0..self.slots.len() {
            if let ResourceSlot::Held { item, .. } = self.slots[idx] {
                if self.rng.random_bool(self.config.change_request_prob) {
                    self.slots[idx] =
                        if delay == 0 { ResourceSlot::Free } else { ResourceSlot::Cooldown { remaining: delay } };
                    requeued.push(WaitingItem { item_id: item, eligible_at: self.step + 1 + delay });
                }
            }
        }
        // Re-queued items go to the head, keeping slot order among themselves.
        for item in requeued.into_iter().rev() {
            self.queue.push_front(item);
        }
    }

    fn arrive(&mut self) -> usize {
        let Some(dist) = self.arrivals.as_ref() else {
            return 0;
        };
        let count = dist.sample(&mut self.rng) as u64;
        let mut dropped = 0;
        for _ in 0..count {
            if self.queue.len() < self.config.max_queue {
                self.queue.push_back(WaitingItem { item_id: self.next_item, eligible_at: self.step + 1 });
                self.next_item += 1;
            } else {
                dropped += 1;
            }
        }
        dropped
    }

    /// Checks the structural invariants of the current state.
    pub fn check_invariants(&self) -> Result<()> {
        if self.slots.len() != self.config.num_resources {
            return Err(Error::State(format!(
                "{} slots for {} resources",
                self.slots.len(),
                self.config.num_resources
            )));
        }
        let mut seen = HashSet::new();
        for slot in &self.slots {
            match *slot {
                ResourceSlot::Held { item, remaining } => {
                    if remaining == 0 {
                        return Err(Error::State("held slot with zero remaining hold".into()));
                    }
                    if !seen.insert(item) {
                        return Err(Error::State(format!("item {item} held by two resources")));
                    }
                }
                ResourceSlot::Cooldown { remaining: 0 } => {
                    return Err(Error::State("cooldown slot with zero remaining".into()));
                }
                _ => {}
            }
        }
        for item in &self.queue {
            if !seen.insert(item.item_id) {
                return Err(Error::State(format!("item {} appears twice", item.item_id)));
            }
        }
        Ok(())
    }
}

/// One row of a trajectory dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub step: u32,
    pub action: usize,
    pub reward: f64,
    pub unutilized: usize,
    pub items_performing: usize,
    pub resources_utilized: usize,
    pub queue_len: usize,
}

impl TrajectoryRecord {
    /// Builds the record for the step that produced `result`.
    pub fn new(step: u32, action: usize, result: &StepResult) -> Self {
        Self {
            step,
            action,
            reward: result.reward,
            unutilized: result.info.unutilized,
            items_performing: result.info.items_performing,
            resources_utilized: result.info.resources_utilized,
            queue_len: result.info.queue_len,
        }
    }
}

pub fn write_trajectory_csv<W: Write>(writer: W, records: &[TrajectoryRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(["step", "action", "reward", "unutilized", "items_performing", "resources_utilized", "queue_len"])?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
