//! Experience replay with optional prioritization and freshness decay.
//!
//! Three modes share one ring buffer:
//! - `Uniform`: indices drawn uniformly, all weights 1.
//! - `Per`: `P(m) = p_m^b1 / sum p^b1` with `p_m = |delta_m| + eps2`.
//! - `Fper`: as `Per` but `p_m = mu^n(m) |delta_m| + eps3`, where `n(m)`
//!   counts how often entry `m` has been replayed.

mod snapshot;
pub mod sum_tree;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use snapshot::SNAPSHOT_VERSION;
use sum_tree::PriorityTree;

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("cannot sample from an empty buffer")]
    EmptyBuffer,
    #[error("corrupt replay snapshot: {0}")]
    CorruptSnapshot(String),
    #[error("invalid buffer configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReplayMode {
    Uniform,
    Per,
    Fper,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BufferConfig {
    pub capacity: usize,
    /// Degree of prioritization.
    pub beta1: f64,
    /// Importance-sampling correction exponent.
    pub beta2: f64,
    /// Freshness discount per replay.
    pub mu: f64,
    pub eps2: f64,
    pub eps3: f64,
    pub mode: ReplayMode,
}

impl BufferConfig {
    pub fn validate(&self) -> Result<(), ReplayError> {
        let bad = |m: &str| Err(ReplayError::InvalidConfig(m.to_string()));
        if self.capacity == 0 {
            return bad("capacity must be positive");
        }
        if !(self.beta1 >= 0.0) {
            return bad("beta1 must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.beta2) {
            return bad("beta2 must lie in [0, 1]");
        }
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return bad("mu must lie in (0, 1)");
        }
        if !(self.eps2 > 0.0 && self.eps3 > 0.0) {
            return bad("eps2 and eps3 must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayEntry {
    pub transition: Transition,
    /// Last observed `|delta|`.
    pub td_abs: f64,
    /// Times replayed since insertion.
    pub replays: u32,
    pub priority: f64,
}

/// Identifies a sampled slot; goes stale once the slot is overwritten.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ticket {
    pub index: usize,
    generation: u64,
}

#[derive(Debug, Clone)]
pub struct SampledBatch {
    pub tickets: Vec<Ticket>,
    /// Importance-sampling weights, divided by the batch maximum.
    pub weights: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub transitions: Vec<Transition>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BufferStats {
    pub size: usize,
    pub max_priority: f64,
    pub mean_replays: f64,
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    config: BufferConfig,
    entries: Vec<ReplayEntry>,
    generations: Vec<u64>,
    cursor: usize,
    pushes: u64,
    tree: PriorityTree,
    stale_updates: u64,
}

impl ReplayBuffer {
    pub fn new(config: BufferConfig) -> Result<Self, ReplayError> {
        config.validate()?;
        Ok(Self {
            config,
            entries: Vec::with_capacity(config.capacity),
            generations: Vec::with_capacity(config.capacity),
            cursor: 0,
            pushes: 0,
            tree: PriorityTree::new(config.capacity),
            stale_updates: 0,
        })
    }

    pub fn config(&self) -> &BufferConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, index: usize) -> &ReplayEntry {
        &self.entries[index]
    }

    pub fn stale_updates(&self) -> u64 {
        self.stale_updates
    }

    /// Current sampling probability of slot `index`.
    pub fn probability(&self, index: usize) -> f64 {
        match self.config.mode {
            ReplayMode::Uniform => 1.0 / self.len() as f64,
            _ => self.tree.get(index) / self.tree.total(),
        }
    }

    fn max_priority(&self) -> f64 {
        if self.is_empty() || self.config.mode == ReplayMode::Uniform {
            1.0
        } else {
            self.tree.max()
        }
    }

    fn set_priority(&mut self, index: usize, priority: f64) {
        self.entries[index].priority = priority;
        if self.config.mode != ReplayMode::Uniform {
            self.tree.set(index, priority.powf(self.config.beta1), priority);
        }
    }

    /// Stores `t` at the ring cursor with the current maximum priority.
    pub fn push(&mut self, t: Transition) -> usize {
        let priority = self.max_priority();
        let index = self.cursor;
        let entry = ReplayEntry { transition: t, td_abs: 0.0, replays: 0, priority };
        if index == self.entries.len() {
            self.entries.push(entry);
            self.generations.push(self.pushes);
        } else {
            self.entries[index] = entry;
            self.generations[index] = self.pushes;
        }
        self.set_priority(index, priority);
        self.pushes += 1;
        self.cursor = (self.cursor + 1) % self.config.capacity;
        index
    }

    /// Draws `batch` entries and bumps their replay counters.
    pub fn sample<R: Rng + ?Sized>(&mut self, batch: usize, rng: &mut R) -> Result<SampledBatch, ReplayError> {
        if self.is_empty() {
            return Err(ReplayError::EmptyBuffer);
        }
        let m = self.len();
        let mut tickets = Vec::with_capacity(batch);
        let mut probabilities = Vec::with_capacity(batch);
        let mut weights = Vec::with_capacity(batch);
        match self.config.mode {
            ReplayMode::Uniform => {
                for _ in 0..batch {
                    let index = rng.random_range(0..m);
                    tickets.push(Ticket { index, generation: self.generations[index] });
                    probabilities.push(1.0 / m as f64);
                    weights.push(1.0);
                }
            }
            ReplayMode::Per | ReplayMode::Fper => {
                let total = self.tree.total();
                let segment = total / batch as f64;
                for i in 0..batch {
                    let mass = (i as f64 + rng.random::<f64>()) * segment;
                    let index = self.tree.find_prefix(mass);
                    let p = self.tree.get(index) / total;
                    tickets.push(Ticket { index, generation: self.generations[index] });
                    probabilities.push(p);
                    weights.push((m as f64 * p).powf(-self.config.beta2));
                }
                let w_max = weights.iter().cloned().fold(0.0, f64::max);
                weights.iter_mut().for_each(|w| *w /= w_max);
            }
        }
        let transitions = tickets
            .iter()
            .map(|t| {
                let e = &mut self.entries[t.index];
                e.replays += 1;
                e.transition.clone()
            })
            .collect();
        Ok(SampledBatch { tickets, weights, probabilities, transitions })
    }

    /// Re-prioritizes sampled entries from their new `|delta|`.
    /// Tickets whose slot was overwritten since sampling are skipped and counted.
    pub fn update_priorities(&mut self, tickets: &[Ticket], td_abs: &[f64]) {
        assert_eq!(tickets.len(), td_abs.len(), "one TD error per ticket");
        for (t, &d) in tickets.iter().zip(td_abs) {
            if self.generations.get(t.index) != Some(&t.generation) {
                self.stale_updates += 1;
                continue;
            }
            let d = d.abs();
            let n = self.entries[t.index].replays;
            self.entries[t.index].td_abs = d;
            let priority = match self.config.mode {
                ReplayMode::Uniform => continue,
                ReplayMode::Per => d + self.config.eps2,
                ReplayMode::Fper => self.config.mu.powi(n as i32) * d + self.config.eps3,
            };
            self.set_priority(t.index, priority);
        }
    }

    pub fn stats(&self) -> BufferStats {
        let size = self.len();
        let max_priority = self.max_priority();
        let mean_replays = if size == 0 {
            0.0
        } else {
            self.entries.iter().map(|e| e.replays as f64).sum::<f64>() / size as f64
        };
        BufferStats { size, max_priority, mean_replays }
    }

    /// Sum of `p^beta1` over live entries as held by the tree root.
    pub fn priority_mass(&self) -> f64 {
        self.tree.total()
    }
}
