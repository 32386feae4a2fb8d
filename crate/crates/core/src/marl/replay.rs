//! Transition replay with FIFO eviction and seeded uniform sampling
//! without replacement.

use super::MarlError;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub obs: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
    /// Shared team reward.
    pub reward: f64,
    pub next_obs: Vec<Vec<f64>>,
    pub done: bool,
}

impl Transition {
    /// Global state for centralized mixers: the first agent's observation,
    /// which already contains the whole world.
    pub fn state(&self) -> &[f64] {
        &self.obs[0]
    }

    pub fn next_state(&self) -> &[f64] {
        &self.next_obs[0]
    }
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    /// Slot the next push overwrites once full.
    head: usize,
    pushed: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { capacity, items: Vec::new(), head: 0, pushed: 0 }
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

    pub fn total_pushed(&self) -> u64 {
        self.pushed
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.head] = t;
        }
        self.head = (self.head + 1) % self.capacity;
        self.pushed += 1;
    }

    /// Transitions from oldest to newest.
    pub fn iter_fifo(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.items.len() < self.capacity { 0 } else { self.head };
        self.items[split..].iter().chain(self.items[..split].iter())
    }

    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Result<Vec<&Transition>, MarlError> {
        if n > self.items.len() {
            return Err(MarlError::InsufficientData { needed: n, available: self.items.len() });
        }
        Ok(sample(rng, self.items.len(), n).into_iter().map(|i| &self.items[i]).collect())
    }
}
