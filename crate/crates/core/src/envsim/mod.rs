//! Desk-scale continuous-control tasks with analytic dense rewards.
//!
//! Observations are the full proprioceptive state. Dynamics are pure
//! functions of `(state, action)`, so a trajectory is fully determined by the
//! reset seed and the action sequence. Every built-in reward lies in
//! `[0, 1]` per step.

mod pendulum;
mod point_mass;
mod push;

pub use pendulum::Pendulum;
pub use point_mass::PointMass;
pub use push::PushIntoZone;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What the evaluation protocol reports for a task.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Undiscounted episodic ground-truth return.
    Return,
    /// Fraction of evaluation episodes ending in the success region.
    SuccessRate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvSpec {
    pub name: String,
    pub state_dim: usize,
    pub action_dim: usize,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
    /// Episode length `T` in steps.
    pub episode_len: usize,
    /// Inclusive bounds on the per-step ground-truth reward.
    pub reward_bounds: (f64, f64),
    pub metric: Metric,
}

impl EnvSpec {
    pub fn clamp_action(&self, action: &[f64]) -> Vec<f64> {
        action
            .iter()
            .zip(self.action_low.iter().zip(&self.action_high))
            .map(|(&a, (&lo, &hi))| a.clamp(lo, hi))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub next_state: Vec<f64>,
    pub reward_true: f64,
    /// True terminal state: no bootstrapping past it.
    pub done: bool,
    /// Episode cut by the time limit `T`.
    pub truncated: bool,
}

/// One `(state, action, ground-truth reward)` triple inside a segment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentStep {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward_true: f64,
}

impl From<&Transition> for SegmentStep {
    fn from(t: &Transition) -> Self {
        SegmentStep {
            state: t.state.clone(),
            action: t.action.clone(),
            reward_true: t.reward_true,
        }
    }
}

/// A fixed-length window of consecutive steps, the unit a teacher compares.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Segment {
    pub steps: Vec<SegmentStep>,
}

impl Segment {
    pub fn new(steps: Vec<SegmentStep>) -> Self {
        Segment { steps }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn rewards(&self) -> impl Iterator<Item = f64> + '_ {
        self.steps.iter().map(|s| s.reward_true)
    }

    /// Undiscounted ground-truth return of the segment.
    pub fn true_return(&self) -> f64 {
        self.rewards().sum()
    }

    /// States of every step concatenated in time order.
    pub fn concat_states(&self) -> Vec<f64> {
        self.steps.iter().flat_map(|s| s.state.iter().copied()).collect()
    }
}

/// A task with deterministic dynamics and an analytic reward.
pub trait Task: Send + Sync {
    fn spec(&self) -> &EnvSpec;

    /// Initial state drawn from the task's initial-state distribution.
    fn reset(&self, seed: u64) -> Vec<f64>;

    /// Next state for an already-clamped action.
    fn dynamics(&self, state: &[f64], action: &[f64]) -> Vec<f64>;

    /// Ground-truth reward `r(s, a)`.
    fn reward(&self, state: &[f64], action: &[f64]) -> f64;

    /// Task success predicate, for tasks that define one.
    fn success(&self, _state: &[f64]) -> Option<bool> {
        None
    }

    fn step(&self, state: &[f64], action: &[f64]) -> Result<Transition> {
        let spec = self.spec();
        if state.len() != spec.state_dim {
            return Err(Error::DimMismatch {
                expected: spec.state_dim,
                got: state.len(),
            });
        }
        if action.len() != spec.action_dim {
            return Err(Error::DimMismatch {
                expected: spec.action_dim,
                got: action.len(),
            });
        }
        if state.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("state"));
        }
        if action.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("action"));
        }
        let action = spec.clamp_action(action);
        let reward_true = self.reward(state, &action);
        let next_state = self.dynamics(state, &action);
        Ok(Transition {
            state: state.to_vec(),
            action,
            next_state,
            reward_true,
            done: false,
            truncated: false,
        })
    }
}

pub const TASK_NAMES: [&str; 3] = ["point_mass", "pendulum", "push"];

/// Options a caller may tweak per task.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskOptions {
    /// Success radius of the push task's target zone.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub success_radius: Option<f64>,
}

/// Look a built-in task up by its registry name.
pub fn make_task(name: &str, options: &TaskOptions) -> Result<Box<dyn Task>> {
    match name {
        "point_mass" => Ok(Box::new(PointMass::new())),
        "pendulum" => Ok(Box::new(Pendulum::new())),
        "push" => {
            let mut task = PushIntoZone::new();
            if let Some(r) = options.success_radius {
                if !(r > 0.0) {
                    return Err(Error::Config(format!("success_radius must be positive, got {r}")));
                }
                task = task.with_success_radius(r);
            }
            Ok(Box::new(task))
        }
        other => Err(Error::Unknown {
            kind: "task",
            name: other.to_string(),
        }),
    }
}

/// A task plus the running episode state and time-limit bookkeeping.
pub struct EnvInstance {
    task: Box<dyn Task>,
    state: Vec<f64>,
    t: usize,
}

impl EnvInstance {
    pub fn new(task: Box<dyn Task>) -> Self {
        let state = vec![0.0; task.spec().state_dim];
        EnvInstance { task, state, t: 0 }
    }

    pub fn spec(&self) -> &EnvSpec {
        self.task.spec()
    }

    pub fn task(&self) -> &dyn Task {
        self.task.as_ref()
    }

    pub fn reset(&mut self, seed: u64) -> &[f64] {
        self.state = self.task.reset(seed);
        self.t = 0;
        &self.state
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn elapsed(&self) -> usize {
        self.t
    }

    pub fn step(&mut self, action: &[f64]) -> Result<Transition> {
        let mut tr = self.task.step(&self.state, action)?;
        self.t += 1;
        tr.truncated = self.t >= self.task.spec().episode_len;
        self.state = tr.next_state.clone();
        Ok(tr)
    }

    pub fn episode_over(&self) -> bool {
        self.t >= self.task.spec().episode_len
    }
}

/// Cut a trajectory into windows of length `h`, starting every `stride` steps.
pub fn slice_segments(trajectory: &[Transition], h: usize, stride: usize) -> Result<Vec<Segment>> {
    if h == 0 || stride == 0 {
        return Err(Error::InvalidArgument("segment length and stride must be positive".into()));
    }
    if h > trajectory.len() {
        return Err(Error::Insufficient(format!(
            "segment length {h} exceeds trajectory length {}",
            trajectory.len()
        )));
    }
    Ok((0..=trajectory.len() - h)
        .step_by(stride)
        .map(|start| Segment::new(trajectory[start..start + h].iter().map(SegmentStep::from).collect()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rollout(task: &dyn Task, seed: u64, n: usize) -> Vec<Transition> {
        let mut s = task.reset(seed);
        (0..n)
            .map(|i| {
                let a: Vec<f64> = (0..task.spec().action_dim).map(|d| ((i + d) as f64 * 0.37).sin()).collect();
                let tr = task.step(&s, &a).unwrap();
                s = tr.next_state.clone();
                tr
            })
            .collect()
    }

    #[test]
    fn registry_knows_every_task() {
        for name in TASK_NAMES {
            let t = make_task(name, &TaskOptions::default()).unwrap();
            assert_eq!(t.spec().name, name);
            let spec = t.spec();
            assert!(spec.action_low.iter().zip(&spec.action_high).all(|(l, h)| l < h));
        }
        assert!(matches!(make_task("walker", &TaskOptions::default()), Err(Error::Unknown { .. })));
    }

    #[test]
    fn identical_seed_and_actions_give_identical_trajectories() {
        for name in TASK_NAMES {
            let t = make_task(name, &TaskOptions::default()).unwrap();
            assert_eq!(t.reset(7), t.reset(7));
            assert_eq!(rollout(t.as_ref(), 7, 60), rollout(t.as_ref(), 7, 60));
        }
    }

    #[test]
    fn rewards_stay_within_documented_bounds() {
        for name in TASK_NAMES {
            let t = make_task(name, &TaskOptions::default()).unwrap();
            let (lo, hi) = t.spec().reward_bounds;
            for seed in 0..20 {
                for tr in rollout(t.as_ref(), seed, 100) {
                    assert!(tr.reward_true.is_finite());
                    assert!(tr.reward_true >= lo && tr.reward_true <= hi, "{name}: {}", tr.reward_true);
                }
            }
        }
    }

    #[test]
    fn non_finite_inputs_are_rejected() {
        let t = PointMass::new();
        assert!(matches!(t.step(&[f64::NAN, 0.0], &[0.0, 0.0]), Err(Error::NonFinite("state"))));
        assert!(matches!(t.step(&[0.0, 0.0], &[0.0, f64::INFINITY]), Err(Error::NonFinite("action"))));
    }

    #[test]
    fn out_of_bounds_actions_are_clamped() {
        let t = PointMass::new();
        let tr = t.step(&[0.0, 0.0], &[5.0, -9.0]).unwrap();
        assert_eq!(tr.action, vec![1.0, -1.0]);
    }

    #[test]
    fn instance_truncates_at_episode_length() {
        let mut env = EnvInstance::new(Box::new(PointMass::new()));
        env.reset(1);
        let t_len = env.spec().episode_len;
        for i in 0..t_len {
            let tr = env.step(&[0.1, 0.1]).unwrap();
            assert_eq!(tr.truncated, i + 1 == t_len);
            assert!(!tr.done);
        }
        assert!(env.episode_over());
    }

    #[test]
    fn slicing_windows() {
        let traj = rollout(&PointMass::new(), 3, 100);
        assert_eq!(slice_segments(&traj[..25], 25, 25).unwrap().len(), 1);
        assert_eq!(slice_segments(&traj[..50], 25, 25).unwrap().len(), 2);
        let segs = slice_segments(&traj, 25, 25).unwrap();
        assert_eq!(segs.len(), 4);
        let reassembled: Vec<SegmentStep> = segs.into_iter().flat_map(|s| s.steps).collect();
        let original: Vec<SegmentStep> = traj.iter().map(SegmentStep::from).collect();
        assert_eq!(reassembled, original);
        assert_eq!(slice_segments(&traj, 25, 1).unwrap().len(), 76);
        assert!(matches!(slice_segments(&traj[..10], 25, 25), Err(Error::Insufficient(_))));
    }

    #[test]
    fn segment_return_is_sum_of_step_rewards() {
        let traj = rollout(&Pendulum::new(), 4, 40);
        let seg = &slice_segments(&traj, 40, 40).unwrap()[0];
        let total: f64 = traj.iter().map(|t| t.reward_true).sum();
        assert_eq!(seg.true_return(), total);
    }
}
