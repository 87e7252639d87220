use std::collections::VecDeque;

use rand::Rng as _;

use crate::envsim::{make_task, EnvInstance, EnvSpec, Metric, SegmentStep, TaskOptions, Transition};
use crate::error::Result;
use crate::rng::{self, Rng};

/// Steps one environment, auto-resetting, and keeps the most recent
/// finished episodes for segment extraction.
pub struct Collector {
    env: EnvInstance,
    episode_seeds: Rng,
    current: Vec<Transition>,
    recent: VecDeque<Vec<Transition>>,
    recent_cap: usize,
    returns: Vec<f64>,
    steps: u64,
}

impl Collector {
    pub fn new(env: EnvInstance, seed: u64, recent_cap: usize) -> Self {
        let mut c = Collector {
            env,
            episode_seeds: rng::stream(seed, "episodes"),
            current: Vec::new(),
            recent: VecDeque::new(),
            recent_cap: recent_cap.max(1),
            returns: Vec::new(),
            steps: 0,
        };
        let s = c.episode_seeds.random();
        c.env.reset(s);
        c
    }

    pub fn spec(&self) -> &EnvSpec {
        self.env.spec()
    }

    pub fn state(&self) -> &[f64] {
        self.env.state()
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn step(&mut self, action: &[f64]) -> Result<Transition> {
        let t = self.env.step(action)?;
        self.steps += 1;
        self.current.push(t.clone());
        if self.env.episode_over() {
            let ep = std::mem::take(&mut self.current);
            self.returns.push(ep.iter().map(|t| t.reward_true).sum());
            self.recent.push_back(ep);
            while self.recent.len() > self.recent_cap {
                self.recent.pop_front();
            }
            let s = self.episode_seeds.random();
            self.env.reset(s);
        }
        Ok(t)
    }

    pub fn recent_episodes(&self) -> impl Iterator<Item = &Vec<Transition>> {
        self.recent.iter()
    }

    /// True returns of every finished episode, oldest first.
    pub fn episode_returns(&self) -> &[f64] {
        &self.returns
    }

    /// Mean true return of the last `window` finished episodes.
    pub fn recent_mean_return(&self, window: usize) -> Option<f64> {
        if self.returns.is_empty() || window == 0 {
            return None;
        }
        let tail = &self.returns[self.returns.len().saturating_sub(window)..];
        Some(tail.iter().sum::<f64>() / tail.len() as f64)
    }
}

#[derive(Clone, Debug, Default)]
pub struct Evaluation {
    pub returns: Vec<f64>,
    pub successes: Vec<f64>,
    pub steps: Vec<SegmentStep>,
}

impl Evaluation {
    pub fn mean_return(&self) -> f64 {
        self.returns.iter().sum::<f64>() / self.returns.len().max(1) as f64
    }

    pub fn success_rate(&self) -> Option<f64> {
        if self.successes.is_empty() {
            None
        } else {
            Some(self.successes.iter().sum::<f64>() / self.successes.len() as f64)
        }
    }
}

/// Run `episodes` episodes on a fresh instance of the task with `policy`.
/// Success is judged on the final state of each episode.
pub fn evaluate<F>(env_name: &str, options: &TaskOptions, episodes: usize, seed: u64, mut policy: F) -> Result<Evaluation>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let mut env = EnvInstance::new(make_task(env_name, options)?);
    let mut seeds = rng::stream(seed, "eval-episodes");
    let mut out = Evaluation::default();
    let tracks_success = env.spec().metric == Metric::SuccessRate;
    for _ in 0..episodes {
        env.reset(seeds.random());
        let mut ret = 0.0;
        let mut last = None;
        while !env.episode_over() {
            let a = policy(env.state())?;
            let t = env.step(&a)?;
            ret += t.reward_true;
            out.steps.push(SegmentStep::from(&t));
            last = Some(t.next_state);
        }
        out.returns.push(ret);
        if tracks_success {
            let ok = last
                .as_deref()
                .and_then(|s| env.task().success(s))
                .unwrap_or(false);
            out.successes.push(if ok { 1.0 } else { 0.0 });
        }
    }
    Ok(out)
}
