use rand::Rng as _;

use super::{EnvSpec, Metric, Task};
use crate::rng;

/// Planar pusher that must shove a puck into a target zone.
///
/// State `[agent_x, agent_y, puck_x, puck_y]` in `[-1, 1]^2` each. The agent
/// moves by `SPEED * a`; whenever it ends a step within `CONTACT` of the puck
/// the puck is displaced along the contact normal until the gap is exactly
/// `CONTACT`. Reward mixes a reach term linear in the agent-puck distance
/// with a placement term `exp(-d / PLACE_SCALE)` in the puck-zone distance,
/// and lies in `[0, 1]`.
#[derive(Clone, Debug)]
pub struct PushIntoZone {
    spec: EnvSpec,
    zone: [f64; 2],
    success_radius: f64,
}

pub const SPEED: f64 = 0.1;
pub const CONTACT: f64 = 0.1;
const REACH_WEIGHT: f64 = 0.3;
const MAX_DIST: f64 = 2.0 * std::f64::consts::SQRT_2;
const PLACE_SCALE: f64 = 0.25;

impl PushIntoZone {
    pub const ZONE: [f64; 2] = [0.6, 0.0];
    pub const DEFAULT_SUCCESS_RADIUS: f64 = 0.2;

    pub fn new() -> Self {
        PushIntoZone {
            spec: EnvSpec {
                name: "push".into(),
                state_dim: 4,
                action_dim: 2,
                action_low: vec![-1.0; 2],
                action_high: vec![1.0; 2],
                episode_len: 50,
                reward_bounds: (0.0, 1.0),
                metric: Metric::SuccessRate,
            },
            zone: Self::ZONE,
            success_radius: Self::DEFAULT_SUCCESS_RADIUS,
        }
    }

    pub fn with_success_radius(mut self, radius: f64) -> Self {
        self.success_radius = radius;
        self
    }

    pub fn success_radius(&self) -> f64 {
        self.success_radius
    }
}

impl Default for PushIntoZone {
    fn default() -> Self {
        Self::new()
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

impl Task for PushIntoZone {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&self, seed: u64) -> Vec<f64> {
        let mut r = rng::from_seed(seed);
        vec![
            r.random_range(-0.5..-0.3),
            r.random_range(-0.2..0.2),
            r.random_range(-0.1..0.1),
            r.random_range(-0.15..0.15),
        ]
    }

    fn dynamics(&self, state: &[f64], action: &[f64]) -> Vec<f64> {
        let agent = [
            (state[0] + SPEED * action[0]).clamp(-1.0, 1.0),
            (state[1] + SPEED * action[1]).clamp(-1.0, 1.0),
        ];
        let mut puck = [state[2], state[3]];
        let gap = dist(&agent, &puck);
        if gap < CONTACT {
            let (nx, ny) = if gap > 1e-12 {
                ((puck[0] - agent[0]) / gap, (puck[1] - agent[1]) / gap)
            } else {
                // Coincident centres: push along the commanded direction.
                let n = action[0].hypot(action[1]);
                if n > 1e-12 {
                    (action[0] / n, action[1] / n)
                } else {
                    (1.0, 0.0)
                }
            };
            puck = [
                (agent[0] + nx * CONTACT).clamp(-1.0, 1.0),
                (agent[1] + ny * CONTACT).clamp(-1.0, 1.0),
            ];
        }
        vec![agent[0], agent[1], puck[0], puck[1]]
    }

    fn reward(&self, state: &[f64], _action: &[f64]) -> f64 {
        let reach = 1.0 - dist(&state[0..2], &state[2..4]) / MAX_DIST;
        let place = (-dist(&state[2..4], &self.zone) / PLACE_SCALE).exp();
        (REACH_WEIGHT * reach + (1.0 - REACH_WEIGHT) * place).clamp(0.0, 1.0)
    }

    fn success(&self, state: &[f64]) -> Option<bool> {
        Some(dist(&state[2..4], &self.zone) <= self.success_radius)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pushing_moves_the_puck_along_the_contact_normal() {
        let t = PushIntoZone::new();
        let s = [0.0, 0.0, 0.15, 0.0];
        let tr = t.step(&s, &[1.0, 0.0]).unwrap();
        assert!((tr.next_state[0] - 0.1).abs() < 1e-12);
        assert!((tr.next_state[2] - 0.2).abs() < 1e-12);
        assert!(tr.next_state[3].abs() < 1e-12);
    }

    #[test]
    fn no_contact_leaves_puck_alone() {
        let t = PushIntoZone::new();
        let tr = t.step(&[-0.8, 0.0, 0.3, 0.3], &[1.0, 0.0]).unwrap();
        assert_eq!(&tr.next_state[2..], &[0.3, 0.3]);
    }

    #[test]
    fn success_uses_configurable_radius() {
        let near = [0.0, 0.0, 0.6 + 0.15, 0.0];
        assert_eq!(PushIntoZone::new().success(&near), Some(true));
        assert_eq!(PushIntoZone::new().with_success_radius(0.1).success(&near), Some(false));
    }

    #[test]
    fn best_state_outscores_start_states() {
        let t = PushIntoZone::new();
        let solved = t.reward(&[0.5, 0.0, 0.6, 0.0], &[0.0, 0.0]);
        for seed in 0..50 {
            assert!(t.reward(&t.reset(seed), &[0.0, 0.0]) < solved);
        }
    }
}
