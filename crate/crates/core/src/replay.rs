//! Bounded FIFO experience store with uniform minibatch sampling.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// One stored experience. `done` marks a true terminal (collision); budget
/// truncations keep bootstrapping.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: [f64; 2],
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
}

/// Ring buffer evicting strictly oldest-first once full. Storage grows on
/// demand so huge configured capacities cost nothing until filled.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    storage: Vec<Transition>,
    capacity: usize,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "capacity must be positive");
        ReplayBuffer { storage: Vec::new(), capacity, next: 0 }
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: Transition) {
        if self.storage.len() < self.capacity {
            self.storage.push(t);
        } else {
            self.storage[self.next] = t;
            self.next = (self.next + 1) % self.capacity;
        }
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.storage[i]
    }

    /// Uniform-with-replacement minibatch indices; deterministic for a
    /// seeded generator.
    pub fn sample_indices(&self, m: usize, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
        if self.storage.len() < m {
            return Err(Error::Usage(format!(
                "replay buffer underfull: {} stored, {m} requested",
                self.storage.len()
            )));
        }
        Ok((0..m).map(|_| rng.random_range(0..self.storage.len())).collect())
    }

    pub fn sample(&self, m: usize, rng: &mut ChaCha8Rng) -> Result<Vec<&Transition>> {
        Ok(self
            .sample_indices(m, rng)?
            .into_iter()
            .map(|i| &self.storage[i])
            .collect())
    }
}
