use serde::{Deserialize, Serialize};

use crate::env::StepInfo;

/// `100 * items / resources`, or 0 when no resource was ever utilized.
pub fn efficiency(total_items_performing: u64, total_resources_utilized: u64) -> f64 {
    if total_resources_utilized == 0 {
        0.0
    } else {
        100.0 * total_items_performing as f64 / total_resources_utilized as f64
    }
}

/// Rounds to one decimal place, as in a printed table.
pub fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UtilizationPoint {
    pub period: usize,
    pub items_performing: usize,
    pub resources_utilized: usize,
    pub unutilized: usize,
}

/// Aggregates over every evaluation period of a run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsReport {
    /// Periods with more free resources than the target.
    pub time_periods_under_capacity: u64,
    /// Periods with fewer free resources than the target.
    pub time_periods_over_capacity: u64,
    pub time_periods_at_target: u64,
    pub total_items_performing: u64,
    pub total_resources_utilized: u64,
    pub efficiency_percent: f64,
    pub mean_eval_reward: f64,
    /// Total reward of each evaluation episode.
    pub episode_rewards: Vec<f64>,
    pub utilization: Vec<UtilizationPoint>,
}

impl MetricsReport {
    pub fn periods(&self) -> u64 {
        self.time_periods_under_capacity + self.time_periods_over_capacity + self.time_periods_at_target
    }

    /// Mean `|unutilized - target|` per period; the negated mean reward.
    pub fn mean_abs_deviation(&self) -> f64 {
        -self.mean_eval_reward
    }

    pub(crate) fn record(&mut self, info: &StepInfo, reward: f64, target: usize) {
        use std::cmp::Ordering::*;
        match info.unutilized.cmp(&target) {
            Greater => self.time_periods_under_capacity += 1,
            Less => self.time_periods_over_capacity += 1,
            Equal => self.time_periods_at_target += 1,
        }
        self.total_items_performing += info.items_performing as u64;
        self.total_resources_utilized += info.resources_utilized as u64;
        self.mean_eval_reward += reward;
        self.utilization.push(UtilizationPoint {
            period: self.utilization.len(),
            items_performing: info.items_performing,
            resources_utilized: info.resources_utilized,
            unutilized: info.unutilized,
        });
    }

    pub(crate) fn finish(&mut self) {
        let periods = self.periods();
        if periods > 0 {
            self.mean_eval_reward /= periods as f64;
        }
        self.efficiency_percent = efficiency(self.total_items_performing, self.total_resources_utilized);
    }
}

/// One row of `metrics.csv` / `comparison.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub variant: u8,
    /// Seed as text, or `median` for aggregate rows.
    pub seed: String,
    pub time_period_under_capacity: f64,
    pub time_period_over_capacity: f64,
    pub time_period_at_target: f64,
    pub total_items_performing: f64,
    pub total_resources_utilized: f64,
    pub efficiency_percent: f64,
    pub mean_eval_reward: f64,
    pub error: String,
}

impl MetricsRow {
    pub fn from_report(variant: u8, seed: u64, r: &MetricsReport) -> Self {
        Self {
            variant,
            seed: seed.to_string(),
            time_period_under_capacity: r.time_periods_under_capacity as f64,
            time_period_over_capacity: r.time_periods_over_capacity as f64,
            time_period_at_target: r.time_periods_at_target as f64,
            total_items_performing: r.total_items_performing as f64,
            total_resources_utilized: r.total_resources_utilized as f64,
            efficiency_percent: r.efficiency_percent,
            mean_eval_reward: r.mean_eval_reward,
            error: String::new(),
        }
    }

    pub fn failed(variant: u8, seed: u64, error: String) -> Self {
        Self {
            variant,
            seed: seed.to_string(),
            time_period_under_capacity: f64::NAN,
            time_period_over_capacity: f64::NAN,
            time_period_at_target: f64::NAN,
            total_items_performing: f64::NAN,
            total_resources_utilized: f64::NAN,
            efficiency_percent: f64::NAN,
            mean_eval_reward: f64::NAN,
            error,
        }
    }

    pub fn is_error(&self) -> bool {
        !self.error.is_empty()
    }

    /// Elementwise median over successful rows; `None` if there are none.
    pub fn median(variant: u8, rows: &[&MetricsRow]) -> Option<Self> {
        let ok: Vec<_> = rows.iter().filter(|r| !r.is_error()).collect();
        if ok.is_empty() {
            return None;
        }
        let med = |f: fn(&MetricsRow) -> f64| median(ok.iter().map(|r| f(r)).collect());
        Some(Self {
            variant,
            seed: "median".into(),
            time_period_under_capacity: med(|r| r.time_period_under_capacity),
            time_period_over_capacity: med(|r| r.time_period_over_capacity),
            time_period_at_target: med(|r| r.time_period_at_target),
            total_items_performing: med(|r| r.total_items_performing),
            total_resources_utilized: med(|r| r.total_resources_utilized),
            efficiency_percent: med(|r| r.efficiency_percent),
            mean_eval_reward: med(|r| r.mean_eval_reward),
            error: String::new(),
        })
    }
}

/// Median with the midpoint convention for even counts.
pub fn median(mut values: Vec<f64>) -> f64 {
    assert!(!values.is_empty(), "median of nothing");
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}
