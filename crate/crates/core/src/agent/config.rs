use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{AdamConfig, DEFAULT_SIGMA0};

/// Architectural switches that distinguish the agent variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Switches {
    pub dueling: bool,
    pub noisy: bool,
    pub prioritized: bool,
    pub bagging: bool,
}

/// The eight compared agents, numbered 1 to 8.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Variant {
    Ddqn = 1,
    D3qn = 2,
    NoisyD3qn = 3,
    PerDdqn = 4,
    PerNoisyD3qn = 5,
    BaggingD3qn = 6,
    NoisyBagging = 7,
    NoisyBaggingD3qn = 8,
}

impl Variant {
    pub const ALL: [Variant; 8] = [
        Variant::Ddqn,
        Variant::D3qn,
        Variant::NoisyD3qn,
        Variant::PerDdqn,
        Variant::PerNoisyD3qn,
        Variant::BaggingD3qn,
        Variant::NoisyBagging,
        Variant::NoisyBaggingD3qn,
    ];

    pub fn from_id(id: u8) -> Result<Self> {
        Self::ALL
            .get(usize::from(id).wrapping_sub(1))
            .copied()
            .ok_or_else(|| Error::Config(format!("unknown variant {id}; expected 1..=8")))
    }

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Ddqn => "Double Deep Q Learning",
            Variant::D3qn => "D3 Q Learning",
            Variant::NoisyD3qn => "Noisy D3 Q Learning",
            Variant::PerDdqn => "Prioritised Replay DDQN",
            Variant::PerNoisyD3qn => "Prioritised Replay Noisy D3 Q Learning",
            Variant::BaggingD3qn => "Bagging D3 Q Learning",
            Variant::NoisyBagging => "Noisy Bagging",
            Variant::NoisyBaggingD3qn => "Noisy Bagging D3 Q Learning",
        }
    }

    pub fn switches(self) -> Switches {
        let s = |dueling, noisy, prioritized, bagging| Switches { dueling, noisy, prioritized, bagging };
        match self {
            Variant::Ddqn => s(false, false, false, false),
            Variant::D3qn => s(true, false, false, false),
            Variant::NoisyD3qn => s(true, true, false, false),
            Variant::PerDdqn => s(false, false, true, false),
            Variant::PerNoisyD3qn => s(true, true, true, false),
            Variant::BaggingD3qn => s(true, false, false, true),
            // Listed without "D3": noisy bagging over a plain head.
            Variant::NoisyBagging => s(false, true, false, true),
            Variant::NoisyBaggingD3qn => s(true, true, false, true),
        }
    }
}

impl TryFrom<u8> for Variant {
    type Error = Error;

    fn try_from(id: u8) -> Result<Self> {
        Self::from_id(id)
    }
}

impl From<Variant> for u8 {
    fn from(v: Variant) -> u8 {
        v.id()
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.id())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Aggregator {
    #[default]
    MajorityVote,
    RandomHead,
}

/// Linear epsilon decay over environment steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_steps: u64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self { start: 1.0, end: 0.05, decay_steps: 10_000 }
    }
}

impl EpsilonSchedule {
    pub fn value(&self, step: u64) -> f64 {
        if step >= self.decay_steps {
            return self.end;
        }
        let frac = step as f64 / self.decay_steps as f64;
        self.start + frac * (self.end - self.start)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    #[serde(flatten)]
    pub switches: Switches,
    pub gamma: f64,
    pub optimizer: AdamConfig,
    pub batch_size: usize,
    /// Learn steps between wholesale target-network copies.
    pub target_sync_period: u64,
    /// Used only when `noisy` is off.
    pub epsilon: EpsilonSchedule,
    pub ensemble_size: usize,
    pub aggregator: Aggregator,
    pub p_mask: f64,
    pub hidden: Vec<usize>,
    pub sigma0: f64,
    pub replay_capacity: usize,
    /// Stored transitions required before learning starts.
    pub warmup: usize,
    pub per_alpha: f64,
    pub per_beta_start: f64,
    pub per_beta_end: f64,
    /// Environment steps over which beta rises to `per_beta_end`.
    pub per_beta_steps: u64,
    pub per_eps: f64,
    pub huber_delta: f64,
    pub seed: u64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            switches: Switches::default(),
            gamma: 0.99,
            optimizer: AdamConfig::default(),
            batch_size: 32,
            target_sync_period: 1000,
            epsilon: EpsilonSchedule::default(),
            ensemble_size: 5,
            aggregator: Aggregator::MajorityVote,
            p_mask: 0.5,
            hidden: vec![64, 64],
            sigma0: DEFAULT_SIGMA0,
            replay_capacity: 10_000,
            warmup: 500,
            per_alpha: 0.6,
            per_beta_start: 0.4,
            per_beta_end: 1.0,
            per_beta_steps: 50_000,
            per_eps: 1e-6,
            huber_delta: 1.0,
            seed: 0,
        }
    }
}

impl AgentConfig {
    pub fn for_variant(variant: Variant) -> Self {
        Self { switches: variant.switches(), ..Self::default() }
    }

    /// Number of Q networks trained: the ensemble size when bagging, else one.
    pub fn heads(&self) -> usize {
        if self.switches.bagging {
            self.ensemble_size
        } else {
            1
        }
    }

    pub fn per_beta(&self, step: u64) -> f64 {
        if step >= self.per_beta_steps {
            return self.per_beta_end;
        }
        let frac = step as f64 / self.per_beta_steps as f64;
        self.per_beta_start + frac * (self.per_beta_end - self.per_beta_start)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(0.0..1.0).contains(&self.gamma) {
            return fail(format!("gamma {} outside [0, 1)", self.gamma));
        }
        if self.batch_size == 0 || self.replay_capacity == 0 || self.target_sync_period == 0 {
            return fail("batch_size, replay_capacity and target_sync_period must be positive".into());
        }
        if self.switches.bagging && !(1..=64).contains(&self.ensemble_size) {
            return fail(format!("ensemble_size {} outside [1, 64]", self.ensemble_size));
        }
        if self.switches.bagging && self.switches.prioritized {
            return fail("prioritized replay cannot be combined with bagging".into());
        }
        if !(0.0..=1.0).contains(&self.p_mask) {
            return fail(format!("p_mask {} outside [0, 1]", self.p_mask));
        }
        if self.optimizer.lr <= 0.0 || !self.optimizer.lr.is_finite() {
            return fail("learning rate must be positive".into());
        }
        if self.huber_delta <= 0.0 {
            return fail("huber_delta must be positive".into());
        }
        Ok(())
    }
}

/// Optional replacements for [`AgentConfig`] fields; absent fields keep the
/// variant defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentOverrides {
    pub gamma: Option<f64>,
    pub lr: Option<f64>,
    pub batch_size: Option<usize>,
    pub target_sync_period: Option<u64>,
    pub epsilon: Option<EpsilonSchedule>,
    pub ensemble_size: Option<usize>,
    pub aggregator: Option<Aggregator>,
    pub p_mask: Option<f64>,
    pub hidden: Option<Vec<usize>>,
    pub sigma0: Option<f64>,
    pub replay_capacity: Option<usize>,
    pub warmup: Option<usize>,
    pub per_alpha: Option<f64>,
    pub per_beta_start: Option<f64>,
    pub per_beta_end: Option<f64>,
    pub per_beta_steps: Option<u64>,
    pub per_eps: Option<f64>,
}

impl AgentOverrides {
    pub fn apply(&self, cfg: &mut AgentConfig) {
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field.clone() {
                    cfg.$field = v;
                }
            )*};
        }
        set!(
            gamma,
            batch_size,
            target_sync_period,
            epsilon,
            ensemble_size,
            aggregator,
            p_mask,
            hidden,
            sigma0,
            replay_capacity,
            warmup,
            per_alpha,
            per_beta_start,
            per_beta_end,
            per_beta_steps,
            per_eps
        );
        if let Some(lr) = self.lr {
            cfg.optimizer.lr = lr;
        }
    }
}
