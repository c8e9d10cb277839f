use std::io::Write;

use rand::Rng;

use super::sum_tree::SumTree;
use super::uniform::UniformMemory;
use super::Transition;
use crate::error::{Error, Result};

/// Ring buffer whose slots are sampled proportionally to
/// `p_i = (|td_error_i| + eps)^alpha`.
#[derive(Debug, Clone)]
pub struct PrioritizedMemory {
    buffer: UniformMemory,
    tree: SumTree,
    alpha: f64,
    eps: f64,
    max_priority: f64,
}

/// One prioritized draw: slot plus normalized importance weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrioritySample {
    pub slot: usize,
    pub weight: f64,
}

impl PrioritizedMemory {
    pub fn new(capacity: usize, alpha: f64, eps: f64) -> Self {
        Self { buffer: UniformMemory::new(capacity), tree: SumTree::new(capacity), alpha, eps, max_priority: 1.0 }
    }

    /// Stores `t` at the running maximum priority so it is sampled at least once.
    pub fn push(&mut self, t: Transition) -> usize {
        let slot = self.buffer.push(t);
        self.tree.set(slot, self.max_priority);
        slot
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn get(&self, slot: usize) -> &Transition {
        self.buffer.get(slot)
    }

    pub fn priority(&self, slot: usize) -> f64 {
        self.tree.get(slot)
    }

    pub fn max_priority(&self) -> f64 {
        self.max_priority
    }

    pub fn tree(&self) -> &SumTree {
        &self.tree
    }

    pub fn priority_for(&self, td_error: f64) -> f64 {
        (td_error.abs() + self.eps).powf(self.alpha)
    }

    pub fn update_priorities(&mut self, slots: &[usize], td_errors: &[f64]) -> Result<()> {
        if slots.len() != td_errors.len() {
            return Err(Error::Contract(format!("{} slots but {} TD errors", slots.len(), td_errors.len())));
        }
        if let Some(bad) = td_errors.iter().find(|d| !d.is_finite()) {
            return Err(Error::Numeric(format!("non-finite TD error {bad}")));
        }
        for (&slot, &delta) in slots.iter().zip(td_errors) {
            if slot >= self.buffer.len() {
                return Err(Error::Contract(format!("slot {slot} is not filled")));
            }
            let p = self.priority_for(delta);
            self.tree.set(slot, p);
            self.max_priority = self.max_priority.max(p);
        }
        Ok(())
    }

    /// Stratified proportional sampling: `[0, total)` is cut into
    /// `batch_size` equal segments with one uniform draw in each. Importance
    /// weights `(N * P(i))^-beta` are divided by the batch maximum. Returns
    /// `None` when the memory is empty or all priorities are zero.
    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, beta: f64, rng: &mut R) -> Option<Vec<PrioritySample>> {
        let total = self.tree.total();
        if self.buffer.is_empty() || batch_size == 0 || total <= 0.0 {
            return None;
        }
        let n = self.buffer.len() as f64;
        let segment = total / batch_size as f64;
        let mut out: Vec<PrioritySample> = (0..batch_size)
            .map(|i| {
                let lo = segment * i as f64;
                let point = lo + rng.random::<f64>() * segment;
                let slot = self.tree.find(point).min(self.buffer.len() - 1);
                let prob = self.tree.get(slot) / total;
                PrioritySample { slot, weight: (n * prob).powf(-beta) }
            })
            .collect();
        let max_w = out.iter().map(|s| s.weight).fold(0.0, f64::max);
        for s in &mut out {
            s.weight /= max_w;
        }
        Some(out)
    }

    pub fn write_log<W: Write>(&self, writer: W) -> Result<()> {
        self.buffer.write_log(writer)
    }
}
