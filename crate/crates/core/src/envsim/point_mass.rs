use rand::Rng as _;

use super::{EnvSpec, Metric, Task};
use crate::rng;

/// Planar point mass that must reach a fixed goal.
///
/// State `[x, y]` in `[-1, 1]^2`, starting in a small square around
/// `START`; action is a velocity command in `[-1, 1]^2` and the position
/// moves by `SPEED * a` per step. Reward is
/// `1 - |pos - goal| / MAX_DIST`, i.e. 1 at the goal and 0 at the farthest
/// corner of the arena.
#[derive(Clone, Debug)]
pub struct PointMass {
    spec: EnvSpec,
    goal: [f64; 2],
}

pub const SPEED: f64 = 0.03;
pub const START: [f64; 2] = [-0.5, -0.5];
pub const START_HALF_WIDTH: f64 = 0.2;

impl PointMass {
    pub const GOAL: [f64; 2] = [0.5, 0.5];

    pub fn new() -> Self {
        PointMass {
            spec: EnvSpec {
                name: "point_mass".into(),
                state_dim: 2,
                action_dim: 2,
                action_low: vec![-1.0; 2],
                action_high: vec![1.0; 2],
                episode_len: 50,
                reward_bounds: (0.0, 1.0),
                metric: Metric::Return,
            },
            goal: Self::GOAL,
        }
    }

    /// Largest possible distance between a position in the arena and the goal.
    pub fn max_distance(&self) -> f64 {
        let dx = 1.0 + self.goal[0].abs();
        let dy = 1.0 + self.goal[1].abs();
        dx.hypot(dy)
    }

    pub fn goal(&self) -> [f64; 2] {
        self.goal
    }
}

impl Default for PointMass {
    fn default() -> Self {
        Self::new()
    }
}

impl Task for PointMass {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&self, seed: u64) -> Vec<f64> {
        let mut r = rng::from_seed(seed);
        START
            .iter()
            .map(|c| r.random_range(c - START_HALF_WIDTH..c + START_HALF_WIDTH))
            .collect()
    }

    fn dynamics(&self, state: &[f64], action: &[f64]) -> Vec<f64> {
        state
            .iter()
            .zip(action)
            .map(|(&p, &a)| (p + SPEED * a).clamp(-1.0, 1.0))
            .collect()
    }

    fn reward(&self, state: &[f64], _action: &[f64]) -> f64 {
        let d = (state[0] - self.goal[0]).hypot(state[1] - self.goal[1]);
        (1.0 - d / self.max_distance()).clamp(0.0, 1.0)
    }
}
