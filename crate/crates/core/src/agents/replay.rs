use ndarray::Array2;
use rand::Rng as _;

use crate::envsim::Transition;
use crate::error::{Error, Result};
use crate::reward_model::{reward_input, RewardEnsemble};
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct StoredTransition {
    pub transition: Transition,
    pub reward_learned: f64,
}

/// Fixed-capacity FIFO ring of transitions.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    data: Vec<StoredTransition>,
    capacity: usize,
    write: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay capacity must be positive".into()));
        }
        Ok(ReplayBuffer {
            data: Vec::new(),
            capacity,
            write: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn clear(&mut self) {
        self.data.clear();
        self.write = 0;
    }

    pub fn push(&mut self, transition: Transition, reward_learned: f64) {
        let item = StoredTransition {
            transition,
            reward_learned,
        };
        if self.data.len() < self.capacity {
            self.data.push(item);
        } else {
            self.data[self.write] = item;
        }
        self.write = (self.write + 1) % self.capacity;
    }

    /// Storage-order access; slot order differs from insertion order once
    /// the ring has wrapped.
    pub fn get(&self, i: usize) -> Option<&StoredTransition> {
        self.data.get(i)
    }

    pub fn iter(&self) -> impl Iterator<Item = &StoredTransition> {
        self.data.iter()
    }

    /// Transitions from oldest to newest.
    pub fn chronological(&self) -> impl Iterator<Item = &StoredTransition> {
        let split = if self.data.len() < self.capacity { 0 } else { self.write };
        self.data[split..].iter().chain(self.data[..split].iter())
    }

    pub fn sample_indices(&self, batch: usize, rng: &mut Rng) -> Vec<usize> {
        (0..batch).map(|_| rng.random_range(0..self.data.len())).collect()
    }

    /// Every stored state as a row.
    pub fn states(&self) -> Array2<f64> {
        let dim = self.data.first().map_or(0, |t| t.transition.state.len());
        let mut out = Array2::zeros((self.data.len(), dim));
        for (mut row, t) in out.rows_mut().into_iter().zip(&self.data) {
            row.assign(&ndarray::ArrayView1::from(&t.transition.state[..]));
        }
        out
    }

    /// Recompute every `reward_learned` with the current ensemble.
    pub fn relabel(&mut self, ensemble: &RewardEnsemble) -> Result<usize> {
        const CHUNK: usize = 4096;
        for chunk in self.data.chunks_mut(CHUNK) {
            let cols = ensemble.input_dim();
            let mut rows = Array2::zeros((chunk.len(), cols));
            for (mut row, t) in rows.rows_mut().into_iter().zip(chunk.iter()) {
                let x = reward_input(&t.transition.state, &t.transition.action);
                row.assign(&ndarray::ArrayView1::from(&x[..]));
            }
            let r = ensemble.agent_rewards(rows.view())?;
            for (t, v) in chunk.iter_mut().zip(r.iter()) {
                t.reward_learned = *v;
            }
        }
        Ok(self.data.len())
    }

    /// Overwrite `reward_learned` with the ground-truth reward.
    pub fn relabel_true(&mut self) -> usize {
        for t in &mut self.data {
            t.reward_learned = t.transition.reward_true;
        }
        self.data.len()
    }
}
