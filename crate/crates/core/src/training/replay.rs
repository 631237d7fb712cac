use std::collections::VecDeque;
use std::sync::Arc;

use rand::seq::index::sample;

use crate::error::{Error, Result};
use crate::neural::{DenseMatrix, NormalizedAdjacency};
use crate::rng::{rng_from_seed, Rng};

pub const DEFAULT_REPLAY_CAPACITY: usize = 50_000;

/// One environment step as seen by the learner.
#[derive(Debug, Clone)]
pub struct Transition {
    pub adjacency: Arc<NormalizedAdjacency>,
    pub features: DenseMatrix,
    pub blockers: Vec<usize>,
    pub reward: f64,
    pub next_features: DenseMatrix,
    /// The episode ended with this step; no bootstrap from `next_features`.
    pub terminal: bool,
}

/// Fixed-capacity FIFO of transitions with seeded uniform sampling.
#[derive(Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
    rng: Rng,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, seed: u64) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer {
            capacity,
            items: VecDeque::with_capacity(capacity.min(4096)),
            rng: rng_from_seed(seed),
        }
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

    /// Appends, evicting the oldest entry when full.
    pub fn push(&mut self, transition: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(transition);
    }

    /// `m` distinct transitions chosen uniformly at random.
    pub fn sample(&mut self, m: usize) -> Result<Vec<&Transition>> {
        Ok(self
            .sample_indices(m)?
            .into_iter()
            .map(|i| &self.items[i])
            .collect())
    }

    pub fn sample_indices(&mut self, m: usize) -> Result<Vec<usize>> {
        if m == 0 || m > self.items.len() {
            return Err(Error::Underfull {
                len: self.items.len(),
                requested: m,
            });
        }
        Ok(sample(&mut self.rng, self.items.len(), m).into_vec())
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.items[i]
    }
}
