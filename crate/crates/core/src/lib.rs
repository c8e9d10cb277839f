//! Resource allocation under uncertainty with deep Q-learning.
//!
//! - [`env`]: the discrete-time allocation simulator.
//! - [`nn`]: dense networks with noisy layers, dueling heads and Adam.
//! - [`replay`]: uniform, prioritized and bootstrap-masked replay memories.
//! - [`agent`]: the eight DQN variants and their learning step.
//! - [`harness`]: training loop, evaluation metrics and CSV/SVG outputs.

pub mod agent;
pub mod env;
pub mod error;
pub mod harness;
pub mod nn;
pub mod replay;
pub mod seed;

pub use agent::{make_agent, Agent, AgentConfig, AgentOverrides, Variant};
pub use env::{EnvConfig, Observation, ResourceEnv, ResourceSlot, StepInfo, StepResult, WaitingItem};
pub use error::{Error, Result};
pub use harness::{compare_variants, run, train, MetricsReport, MetricsRow, RunConfig, TrainingLog};
pub use replay::Transition;
