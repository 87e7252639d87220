use std::f64::consts::PI;

use rand::Rng as _;

use super::{EnvSpec, Metric, Task};
use crate::rng;

/// Torque-limited pendulum swing-up.
///
/// State `[cos θ, sin θ, θ̇]` with θ = 0 upright. The reward rescales the
/// classic quadratic cost `θ² + 0.1 θ̇² + 0.001 u²` into `[0, 1]`.
#[derive(Clone, Debug)]
pub struct Pendulum {
    spec: EnvSpec,
    init_angle: f64,
    init_speed: f64,
}

const MAX_SPEED: f64 = 8.0;
const MAX_TORQUE: f64 = 2.0;
const DT: f64 = 0.05;
const G: f64 = 10.0;
const MASS: f64 = 1.0;
const LENGTH: f64 = 1.0;

impl Pendulum {
    pub fn new() -> Self {
        Pendulum {
            spec: EnvSpec {
                name: "pendulum".into(),
                state_dim: 3,
                action_dim: 1,
                action_low: vec![-MAX_TORQUE],
                action_high: vec![MAX_TORQUE],
                episode_len: 100,
                reward_bounds: (0.0, 1.0),
                metric: Metric::Return,
            },
            init_angle: PI,
            init_speed: 1.0,
        }
    }

    /// Initial angle is drawn from `[-range, range]`.
    pub fn with_init_angle(mut self, range: f64) -> Self {
        self.init_angle = range.clamp(0.0, PI);
        self
    }

    pub fn init_angle(&self) -> f64 {
        self.init_angle
    }

    pub fn max_cost() -> f64 {
        PI * PI + 0.1 * MAX_SPEED * MAX_SPEED + 0.001 * MAX_TORQUE * MAX_TORQUE
    }

    pub fn angle(state: &[f64]) -> f64 {
        state[1].atan2(state[0])
    }
}

impl Default for Pendulum {
    fn default() -> Self {
        Self::new()
    }
}

fn wrap_angle(theta: f64) -> f64 {
    (theta + PI).rem_euclid(2.0 * PI) - PI
}

impl Task for Pendulum {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&self, seed: u64) -> Vec<f64> {
        let mut r = rng::from_seed(seed);
        let theta = if self.init_angle > 0.0 {
            r.random_range(-self.init_angle..=self.init_angle)
        } else {
            0.0
        };
        let speed = if self.init_speed > 0.0 {
            r.random_range(-self.init_speed..=self.init_speed)
        } else {
            0.0
        };
        vec![theta.cos(), theta.sin(), speed]
    }

    fn dynamics(&self, state: &[f64], action: &[f64]) -> Vec<f64> {
        let theta = Self::angle(state);
        let u = action[0];
        let speed = (state[2]
            + (3.0 * G / (2.0 * LENGTH) * theta.sin() + 3.0 / (MASS * LENGTH * LENGTH) * u) * DT)
            .clamp(-MAX_SPEED, MAX_SPEED);
        let theta = theta + speed * DT;
        vec![theta.cos(), theta.sin(), speed]
    }

    fn reward(&self, state: &[f64], action: &[f64]) -> f64 {
        let theta = wrap_angle(Self::angle(state));
        let cost = theta * theta + 0.1 * state[2] * state[2] + 0.001 * action[0] * action[0];
        (1.0 - cost / Self::max_cost()).clamp(0.0, 1.0)
    }
}
