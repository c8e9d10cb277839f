//! Training loop, evaluation and multi-variant comparison.

mod metrics;
mod output;

pub use metrics::{efficiency, median, round1, MetricsReport, MetricsRow, UtilizationPoint};
pub use output::{
    emit_plot_data, read_plot_data, render_svgs, write_metrics_csv, write_run_outputs, write_training_log,
    ExplorationPoint, UtilizationRow,
};

use std::path::PathBuf;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::{make_agent, Agent, AgentOverrides, Variant};
use crate::env::{EnvConfig, Observation, ResourceEnv};
use crate::error::{Error, Result};
use crate::replay::Transition;
use crate::seed::{self, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub variant_id: u8,
    pub env: EnvConfig,
    pub agent: AgentOverrides,
    pub training_episodes: usize,
    pub eval_episodes: usize,
    pub seeds: Vec<u64>,
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            variant_id: 8,
            env: EnvConfig::default(),
            agent: AgentOverrides::default(),
            training_episodes: 500,
            eval_episodes: 10,
            seeds: vec![0],
            output_dir: None,
        }
    }
}

impl RunConfig {
    pub fn variant(&self) -> Result<Variant> {
        Variant::from_id(self.variant_id)
    }

    pub fn with_variant(&self, variant: Variant) -> Self {
        Self { variant_id: variant.id(), ..self.clone() }
    }

    fn env_for(&self, seed: u64) -> EnvConfig {
        EnvConfig { seed, ..self.env.clone() }
    }

    fn overrides(&self) -> AgentOverrides {
        let mut o = self.agent.clone();
        if o.per_beta_steps.is_none() {
            o.per_beta_steps = Some(self.training_episodes as u64 * u64::from(self.env.episode_length));
        }
        o
    }
}

/// One row of `training_log.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLogRow {
    pub episode: usize,
    pub cumulative_reward: f64,
    pub epsilon: f64,
    pub noise_magnitude: f64,
    pub vote_disagreement: f64,
    /// The measure plotted against reward: vote disagreement for ensembles,
    /// noise magnitude for noisy agents, epsilon otherwise.
    pub exploration_measure: f64,
    pub mean_loss: Option<f64>,
    pub learn_steps: u64,
}

pub type TrainingLog = Vec<TrainingLogRow>;

/// Information passed to a training observer after every environment step.
#[derive(Debug, Clone, Copy)]
pub struct StepEvent {
    pub episode: usize,
    pub global_step: u64,
    pub loss: Option<f64>,
}

/// Runs the training loop: per episode reset, then per step select an
/// action, step the simulator, store the transition and take a learn step.
pub fn train(cfg: &RunConfig, seed: u64) -> Result<(Agent, TrainingLog)> {
    train_with(cfg, seed, |_, _| {})
}

/// Like [`train`], calling `observer` after each step's learn update.
pub fn train_with(
    cfg: &RunConfig,
    seed: u64,
    mut observer: impl FnMut(&Agent, StepEvent),
) -> Result<(Agent, TrainingLog)> {
    let env_cfg = cfg.env_for(seed);
    let mut env = ResourceEnv::new(env_cfg.clone())?;
    let mut agent = make_agent(cfg.variant_id, &env_cfg, &cfg.overrides())?;
    let switches = agent.config().switches;
    let mut log = Vec::with_capacity(cfg.training_episodes);
    let mut global_step = 0u64;

    for episode in 0..cfg.training_episodes {
        let mut obs = env.reset(seed::derive(seed, seed::TAG_TRAIN_ENV, episode as u64));
        let mut total = 0.0;
        let (mut loss_sum, mut loss_count) = (0.0, 0usize);
        while !env.is_done() {
            let at = |e: Error| match e {
                Error::Numeric(m) => Error::Numeric(format!("step {global_step} (episode {episode}): {m}")),
                other => other,
            };
            let action = agent.select_action(&obs, true).map_err(at)?;
            let result = env.step(action)?;
            total += result.reward;
            agent.observe(Transition {
                state: obs.0,
                action,
                reward: result.reward,
                next_state: result.observation.0.clone(),
                // Episodes end on a time limit only, so bootstrapping continues.
                terminal: false,
            });
            let loss = agent.learn_step().map_err(at)?;
            if let Some(l) = loss {
                loss_sum += l;
                loss_count += 1;
            }
            global_step += 1;
            observer(&agent, StepEvent { episode, global_step, loss });
            obs = result.observation;
        }
        let stats = agent.take_exploration_stats();
        let exploration_measure = if switches.bagging {
            stats.mean_disagreement()
        } else if switches.noisy {
            stats.mean_noise_magnitude()
        } else {
            stats.mean_epsilon()
        };
        log.push(TrainingLogRow {
            episode,
            cumulative_reward: total,
            epsilon: if switches.noisy { 0.0 } else { stats.mean_epsilon() },
            noise_magnitude: stats.mean_noise_magnitude(),
            vote_disagreement: stats.mean_disagreement(),
            exploration_measure,
            mean_loss: (loss_count > 0).then(|| loss_sum / loss_count as f64),
            learn_steps: agent.learn_steps(),
        });
    }
    Ok((agent, log))
}

/// Evaluates an arbitrary policy over `episodes` simulator episodes.
pub fn evaluate_policy(
    env_cfg: &EnvConfig,
    episodes: usize,
    seed: u64,
    mut policy: impl FnMut(&Observation) -> Result<usize>,
) -> Result<MetricsReport> {
    let mut env = ResourceEnv::new(env_cfg.clone())?;
    let mut report = MetricsReport::default();
    for ep in 0..episodes {
        let mut obs = env.reset(seed::derive(seed, seed::TAG_EVAL_ENV, ep as u64));
        let mut total = 0.0;
        while !env.is_done() {
            let action = policy(&obs)?;
            let result = env.step(action)?;
            total += result.reward;
            report.record(&result.info, result.reward, env_cfg.target_unutilized);
            obs = result.observation;
        }
        report.episode_rewards.push(total);
    }
    report.finish();
    Ok(report)
}

/// Greedy, noise-free evaluation. The agent is not modified.
pub fn evaluate(agent: &Agent, env_cfg: &EnvConfig, episodes: usize, seed: u64) -> Result<MetricsReport> {
    let mut rng = seed::rng(seed, seed::TAG_EVAL_ENV, u64::MAX);
    evaluate_policy(env_cfg, episodes, seed, |obs| agent.greedy_action(obs, &mut rng))
}

/// Uniform-random policy on the same evaluation episodes as [`evaluate`].
pub fn evaluate_random(env_cfg: &EnvConfig, episodes: usize, seed: u64) -> Result<MetricsReport> {
    let mut rng: Rng = seed::rng(seed, seed::TAG_BASELINE, 0);
    let actions = env_cfg.num_actions();
    evaluate_policy(env_cfg, episodes, seed, |_| Ok(rng.random_range(0..actions)))
}

/// A trained and evaluated run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub variant: Variant,
    pub seed: u64,
    pub agent: Agent,
    pub log: TrainingLog,
    pub report: MetricsReport,
}

pub fn run(cfg: &RunConfig, seed: u64) -> Result<RunOutcome> {
    let variant = cfg.variant()?;
    let (agent, log) = train(cfg, seed)?;
    let report = evaluate(&agent, &cfg.env_for(seed), cfg.eval_episodes, seed)?;
    Ok(RunOutcome { variant, seed, agent, log, report })
}

/// Result of one (variant, seed) cell of a comparison.
#[derive(Debug, Clone)]
pub struct ComparisonCell {
    pub variant: Variant,
    pub seed: u64,
    pub outcome: std::result::Result<(TrainingLog, MetricsReport), String>,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub cells: Vec<ComparisonCell>,
    /// Per variant, in input order: one row per seed then a `median` row.
    pub rows: Vec<MetricsRow>,
}

impl Comparison {
    pub fn median_row(&self, variant: Variant) -> Option<&MetricsRow> {
        self.rows.iter().find(|r| r.variant == variant.id() && r.seed == "median")
    }
}

/// Trains and evaluates every (variant, seed) pair. Runs execute in parallel;
/// a failing cell is recorded in its row and does not affect the others.
pub fn compare_variants(cfg: &RunConfig, variants: &[Variant], seeds: &[u64]) -> Result<Comparison> {
    if variants.is_empty() || seeds.is_empty() {
        return Err(Error::Config("comparison needs at least one variant and one seed".into()));
    }
    let jobs: Vec<(Variant, u64)> = variants.iter().flat_map(|&v| seeds.iter().map(move |&s| (v, s))).collect();
    let cells: Vec<ComparisonCell> = jobs
        .par_iter()
        .map(|&(variant, seed)| {
            let outcome = run(&cfg.with_variant(variant), seed).map(|o| (o.log, o.report)).map_err(|e| e.to_string());
            ComparisonCell { variant, seed, outcome }
        })
        .collect();

    let mut rows = Vec::new();
    for &v in variants {
        let start = rows.len();
        for cell in cells.iter().filter(|c| c.variant == v) {
            rows.push(match &cell.outcome {
                Ok((_, report)) => MetricsRow::from_report(v.id(), cell.seed, report),
                Err(e) => MetricsRow::failed(v.id(), cell.seed, e.clone()),
            });
        }
        let per_seed: Vec<&MetricsRow> = rows[start..].iter().collect();
        let median = MetricsRow::median(v.id(), &per_seed).unwrap_or_else(|| MetricsRow {
            seed: "median".into(),
            ..MetricsRow::failed(v.id(), 0, "all seeds failed".into())
        });
        rows.push(median);
    }
    Ok(Comparison { cells, rows })
}
