//! State-entropy intrinsic reward from k-nearest-neighbour distances.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExploreConfig {
    pub k: usize,
    /// Unsupervised steps before any feedback, including the random seed steps.
    pub pretrain_steps: usize,
    /// Leading steps taken with uniformly random actions.
    pub seed_steps: usize,
    pub distance_floor: f64,
}

impl Default for ExploreConfig {
    fn default() -> Self {
        ExploreConfig {
            k: 5,
            pretrain_steps: 2000,
            seed_steps: 500,
            distance_floor: 1e-8,
        }
    }
}

impl ExploreConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("explore k must be >= 1".into()));
        }
        if !(self.distance_floor > 0.0) {
            return Err(Error::Config("distance floor must be positive".into()));
        }
        if self.seed_steps > self.pretrain_steps {
            return Err(Error::Config("seed_steps cannot exceed pretrain_steps".into()));
        }
        Ok(())
    }
}

/// `log(max(d_k, floor))` where `d_k` is the k-th smallest distance from
/// `state` to the rows of `set` (0-based, so a copy of `state` inside the
/// set counts as its own nearest neighbour).
pub fn intrinsic_reward(state: &[f64], set: ArrayView2<f64>, k: usize, floor: f64) -> Result<f64> {
    if set.nrows() <= k {
        return Err(Error::Insufficient(format!(
            "k-NN with k = {k} needs more than {k} states, got {}",
            set.nrows()
        )));
    }
    if set.ncols() != state.len() {
        return Err(Error::DimMismatch {
            expected: set.ncols(),
            got: state.len(),
        });
    }
    let mut d: Vec<f64> = set
        .rows()
        .into_iter()
        .map(|row| row.iter().zip(state).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .collect();
    let (_, kth, _) = d.select_nth_unstable_by(k, f64::total_cmp);
    Ok(kth.sqrt().max(floor).ln())
}

pub fn intrinsic_rewards(queries: ArrayView2<f64>, set: ArrayView2<f64>, k: usize, floor: f64) -> Result<Vec<f64>> {
    queries
        .rows()
        .into_iter()
        .map(|q| intrinsic_reward(&q.to_vec(), set, k, floor))
        .collect()
}
