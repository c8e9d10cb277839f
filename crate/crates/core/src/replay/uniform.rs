use std::io::Write;

use rand::Rng;

use super::Transition;
use crate::error::Result;

/// Fixed-capacity ring buffer; the oldest entry is overwritten first.
#[derive(Debug, Clone)]
pub struct UniformMemory {
    capacity: usize,
    items: Vec<Transition>,
    cursor: usize,
}

impl UniformMemory {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { capacity, items: Vec::with_capacity(capacity.min(1 << 16)), cursor: 0 }
    }

    /// Stores `t` and returns the slot it was written to.
    pub fn push(&mut self, t: Transition) -> usize {
        let slot = self.cursor;
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[slot] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
        slot
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, slot: usize) -> &Transition {
        &self.items[slot]
    }

    /// Slots from oldest to newest.
    pub fn slots_in_order(&self) -> impl Iterator<Item = usize> + '_ {
        let start = if self.items.len() < self.capacity { 0 } else { self.cursor };
        (0..self.items.len()).map(move |i| (start + i) % self.items.len())
    }

    /// `batch_size` slots drawn i.i.d. uniformly with replacement, or `None`
    /// when fewer than `batch_size` transitions are stored.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Option<Vec<usize>> {
        if self.items.len() < batch_size || self.items.is_empty() {
            return None;
        }
        Some((0..batch_size).map(|_| rng.random_range(0..self.items.len())).collect())
    }

    pub fn write_log<W: Write>(&self, writer: W) -> Result<()> {
        super::write_log(writer, self.slots_in_order().map(|i| (i, self.items[i].clone(), None)))
    }
}
