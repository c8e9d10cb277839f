use std::io::Write;

use rand::Rng;

use super::uniform::UniformMemory;
use super::Transition;
use crate::error::{Error, Result};

/// Shared ring buffer where each transition carries an immutable bootstrap
/// mask: bit `k` set means ensemble head `k` may train on it.
#[derive(Debug, Clone)]
pub struct BootstrapMemory {
    buffer: UniformMemory,
    masks: Vec<u64>,
    heads: usize,
    p_mask: f64,
    /// Stored transitions with bit `k` set.
    eligible: Vec<usize>,
}

impl BootstrapMemory {
    pub fn new(capacity: usize, heads: usize, p_mask: f64) -> Result<Self> {
        if heads == 0 || heads > 64 {
            return Err(Error::Config(format!("ensemble size {heads} outside [1, 64]")));
        }
        if !(0.0..=1.0).contains(&p_mask) {
            return Err(Error::Config(format!("mask probability {p_mask} outside [0, 1]")));
        }
        Ok(Self { buffer: UniformMemory::new(capacity), masks: Vec::new(), heads, p_mask, eligible: vec![0; heads] })
    }

    pub fn heads(&self) -> usize {
        self.heads
    }

    /// Draws a Bernoulli(p_mask) bit per head; `p_mask = 1` consumes no randomness.
    pub fn draw_mask<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        (0..self.heads).fold(0u64, |mask, k| {
            let bit = self.p_mask >= 1.0 || rng.random_bool(self.p_mask);
            mask | (u64::from(bit) << k)
        })
    }

    pub fn push<R: Rng + ?Sized>(&mut self, t: Transition, rng: &mut R) -> usize {
        let mask = self.draw_mask(rng);
        self.push_with_mask(t, mask)
    }

    pub fn push_with_mask(&mut self, t: Transition, mask: u64) -> usize {
        let mask = if self.heads == 64 { mask } else { mask & ((1u64 << self.heads) - 1) };
        let overwriting = self.buffer.len() == self.buffer.capacity();
        let slot = self.buffer.push(t);
        if overwriting {
            let old = self.masks[slot];
            self.count(old, false);
            self.masks[slot] = mask;
        } else {
            self.masks.push(mask);
        }
        self.count(mask, true);
        slot
    }

    fn count(&mut self, mask: u64, add: bool) {
        for (k, n) in self.eligible.iter_mut().enumerate() {
            if mask >> k & 1 == 1 {
                if add {
                    *n += 1;
                } else {
                    *n -= 1;
                }
            }
        }
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

    pub fn mask(&self, slot: usize) -> u64 {
        self.masks[slot]
    }

    pub fn eligible_count(&self, head: usize) -> usize {
        self.eligible[head]
    }

    /// Uniform draws with replacement among transitions whose mask includes
    /// `head`. `None` when fewer than `batch_size` such transitions exist.
    pub fn sample_for_head<R: Rng + ?Sized>(&self, head: usize, batch_size: usize, rng: &mut R) -> Option<Vec<usize>> {
        if head >= self.heads || batch_size == 0 || self.eligible[head] < batch_size {
            return None;
        }
        let n = self.buffer.len();
        let mut out = Vec::with_capacity(batch_size);
        while out.len() < batch_size {
            let slot = rng.random_range(0..n);
            if self.masks[slot] >> head & 1 == 1 {
                out.push(slot);
            }
        }
        Some(out)
    }

    pub fn write_log<W: Write>(&self, writer: W) -> Result<()> {
        super::write_log(
            writer,
            self.buffer.slots_in_order().map(|i| {
                let bits: String =
                    (0..self.heads).map(|k| if self.masks[i] >> k & 1 == 1 { '1' } else { '0' }).collect();
                (i, self.buffer.get(i).clone(), Some(bits))
            }),
        )
    }
}
