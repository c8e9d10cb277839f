//! Experience storage: uniform ring buffer, proportional prioritized replay
//! over a sum tree, and bootstrap-masked storage for ensembles.

mod bootstrap;
mod prioritized;
mod sum_tree;
mod uniform;

pub use bootstrap::BootstrapMemory;
pub use prioritized::{PrioritizedMemory, PrioritySample};
pub use sum_tree::SumTree;
pub use uniform::UniformMemory;

use std::io::Write;

use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
}

/// Writes `index,action,reward,terminal,mask` rows; `mask` is a bit string
/// (head 0 first) or empty when the memory carries no masks.
pub(crate) fn write_log<W: Write>(
    writer: W,
    rows: impl Iterator<Item = (usize, Transition, Option<String>)>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["index", "action", "reward", "terminal", "mask"])?;
    for (idx, t, mask) in rows {
        w.write_record([
            idx.to_string(),
            t.action.to_string(),
            t.reward.to_string(),
            t.terminal.to_string(),
            mask.unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
