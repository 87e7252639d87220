//! On-policy clipped-surrogate learner with generalized advantage estimation.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand_distr::StandardNormal;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::envsim::Transition;
use crate::error::{Error, Result};
use crate::nn::{Activation, Adam, Gradients, Mlp, VecAdam};
use crate::rng::{self, Rng};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoConfig {
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub rollout_len: usize,
    pub epochs: usize,
    pub minibatch: usize,
    pub clip: f64,
    pub gae_lambda: f64,
    pub gamma: f64,
    pub value_coef: f64,
    pub init_log_std: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            hidden: vec![64, 64],
            lr: 3e-4,
            rollout_len: 500,
            epochs: 10,
            minibatch: 64,
            clip: 0.2,
            gae_lambda: 0.95,
            gamma: 0.99,
            value_coef: 0.5,
            init_log_std: -0.5,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rollout_len == 0 || self.epochs == 0 || self.minibatch == 0 {
            return Err(Error::Config("ppo rollout_len, epochs and minibatch must be positive".into()));
        }
        if !(self.clip > 0.0) || !(self.lr > 0.0) {
            return Err(Error::Config("ppo clip and lr must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) || !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Config("ppo gamma and lambda must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

pub fn gaussian_log_prob(mean: &[f64], log_std: &[f64], action: &[f64]) -> f64 {
    mean.iter()
        .zip(log_std)
        .zip(action)
        .map(|((&m, &ls), &a)| {
            let z = (a - m) / ls.exp();
            -0.5 * z * z - ls - 0.5 * LN_2PI
        })
        .sum()
}

/// GAE over a time-ordered rollout that may span several episodes.
///
/// `next_values[t]` is the value of the transition's successor state; it is
/// masked by `dones` (true terminals) while `cuts` (terminal or time limit)
/// stop the recursion from leaking across episode boundaries.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    next_values: &[f64],
    dones: &[bool],
    cuts: &[bool],
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * live * next_values[t] - values[t];
        if cuts[t] {
            running = 0.0;
        }
        running = delta + gamma * lambda * running;
        adv[t] = running;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

#[derive(Clone, Debug)]
pub struct RolloutStep {
    pub transition: Transition,
    /// Pre-clamp Gaussian sample.
    pub raw_action: Vec<f64>,
    pub log_prob: f64,
}

#[derive(Clone, Debug, Default)]
pub struct Rollout {
    pub steps: Vec<RolloutStep>,
}

impl Rollout {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn clear(&mut self) {
        self.steps.clear();
    }
}

#[derive(Clone, Debug)]
pub struct PpoBatch {
    pub states: Array2<f64>,
    pub actions: Array2<f64>,
    pub old_log_probs: Array1<f64>,
    pub advantages: Array1<f64>,
    pub returns: Array1<f64>,
}

pub struct PolicyLoss {
    pub loss: f64,
    pub net_grads: Gradients,
    pub log_std_grads: Vec<f64>,
    pub clip_fraction: f64,
}

/// Clipped surrogate `-mean(min(r A, clip(r, 1-eps, 1+eps) A))`.
pub fn policy_loss_and_grads(policy: &Mlp, log_std: &[f64], batch: &PpoBatch, clip: f64) -> Result<PolicyLoss> {
    let n = batch.states.nrows();
    let d = log_std.len();
    let cache = policy.forward_cached(batch.states.view())?;
    let mu = cache.output();
    let nf = n as f64;
    let mut grad_out = Array2::zeros((n, d));
    let mut ls_grads = vec![0.0; d];
    let mut loss = 0.0;
    let mut clipped = 0usize;
    for i in 0..n {
        let m = mu.row(i).to_vec();
        let a = batch.actions.row(i).to_vec();
        let lp = gaussian_log_prob(&m, log_std, &a);
        let ratio = (lp - batch.old_log_probs[i]).exp();
        let adv = batch.advantages[i];
        let unclipped = ratio * adv;
        let bounded = ratio.clamp(1.0 - clip, 1.0 + clip) * adv;
        if bounded < unclipped {
            clipped += 1;
            loss -= bounded;
            continue;
        }
        loss -= unclipped;
        let dlp = -ratio * adv / nf;
        for j in 0..d {
            let var = (2.0 * log_std[j]).exp();
            let diff = a[j] - m[j];
            grad_out[[i, j]] = dlp * diff / var;
            ls_grads[j] += dlp * (diff * diff / var - 1.0);
        }
    }
    let (net_grads, _) = policy.backward(&cache, grad_out.view());
    Ok(PolicyLoss {
        loss: loss / nf,
        net_grads,
        log_std_grads: ls_grads,
        clip_fraction: clipped as f64 / nf,
    })
}

/// `mean((V(s) - R)^2)` and its gradient.
pub fn value_loss_and_grads(value: &Mlp, states: ArrayView2<f64>, returns: &Array1<f64>) -> Result<(f64, Gradients)> {
    let cache = value.forward_cached(states)?;
    let resid = &cache.output().column(0) - returns;
    let n = returns.len() as f64;
    let loss = resid.mapv(|r| r * r).sum() / n;
    let g = resid.mapv(|r| 2.0 * r / n).insert_axis(Axis(1));
    let (grads, _) = value.backward(&cache, g.view());
    Ok((loss, grads))
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PpoLosses {
    pub policy: f64,
    pub value: f64,
    pub clip_fraction: f64,
}

#[derive(Clone, Debug)]
pub struct PpoAgent {
    pub policy: Mlp,
    pub log_std: Vec<f64>,
    pub value: Mlp,
    policy_opt: Adam,
    log_std_opt: VecAdam,
    value_opt: Adam,
    config: PpoConfig,
}

impl PpoAgent {
    pub fn new(state_dim: usize, action_dim: usize, config: PpoConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut sizes = vec![state_dim];
        sizes.extend(&config.hidden);
        sizes.push(action_dim);
        let policy = Mlp::new(&sizes, Activation::Tanh, Activation::Identity, &mut rng::stream(seed, "policy-init"));
        *sizes.last_mut().unwrap() = 1;
        let value = Mlp::new(&sizes, Activation::Tanh, Activation::Identity, &mut rng::stream(seed, "value-init"));
        Ok(PpoAgent {
            policy_opt: Adam::new(&policy, config.lr),
            value_opt: Adam::new(&value, config.lr),
            log_std_opt: VecAdam::new(action_dim, config.lr),
            log_std: vec![config.init_log_std; action_dim],
            policy,
            value,
            config,
        })
    }

    pub fn config(&self) -> &PpoConfig {
        &self.config
    }

    /// Sampled raw action and its log-probability, or the mean when `rng` is `None`.
    pub fn act(&self, state: &[f64], rng: Option<&mut Rng>) -> Result<(Vec<f64>, f64)> {
        let mean = self.policy.forward_one(state)?;
        let action: Vec<f64> = match rng {
            None => mean.clone(),
            Some(r) => mean
                .iter()
                .zip(&self.log_std)
                .map(|(&m, &ls)| m + ls.exp() * r.sample::<f64, _>(StandardNormal))
                .collect(),
        };
        let lp = gaussian_log_prob(&mean, &self.log_std, &action);
        Ok((action, lp))
    }

    pub fn values(&self, states: ArrayView2<f64>) -> Result<Array1<f64>> {
        Ok(self.value.forward(states)?.column(0).to_owned())
    }

    /// Build the batch for a rollout with per-step agent rewards.
    pub fn prepare(&self, rollout: &Rollout, rewards: &[f64]) -> Result<PpoBatch> {
        let n = rollout.len();
        if n == 0 || rewards.len() != n {
            return Err(Error::InvalidArgument("rollout and rewards must be non-empty and aligned".into()));
        }
        let sd = rollout.steps[0].transition.state.len();
        let ad = rollout.steps[0].raw_action.len();
        let mut states = Array2::zeros((n, sd));
        let mut next = Array2::zeros((n, sd));
        let mut actions = Array2::zeros((n, ad));
        for (i, s) in rollout.steps.iter().enumerate() {
            states.row_mut(i).assign(&ndarray::ArrayView1::from(&s.transition.state[..]));
            next.row_mut(i).assign(&ndarray::ArrayView1::from(&s.transition.next_state[..]));
            actions.row_mut(i).assign(&ndarray::ArrayView1::from(&s.raw_action[..]));
        }
        let values = self.values(states.view())?.to_vec();
        let next_values = self.values(next.view())?.to_vec();
        let dones: Vec<bool> = rollout.steps.iter().map(|s| s.transition.done).collect();
        let mut cuts: Vec<bool> = rollout
            .steps
            .iter()
            .map(|s| s.transition.done || s.transition.truncated)
            .collect();
        cuts[n - 1] = true;
        let (adv, returns) = gae(rewards, &values, &next_values, &dones, &cuts, self.config.gamma, self.config.gae_lambda);
        Ok(PpoBatch {
            states,
            actions,
            old_log_probs: rollout.steps.iter().map(|s| s.log_prob).collect(),
            advantages: normalize(&adv).into(),
            returns: returns.into(),
        })
    }

    pub fn update(&mut self, batch: &PpoBatch, rng: &mut Rng) -> Result<PpoLosses> {
        let n = batch.states.nrows();
        let mut order: Vec<usize> = (0..n).collect();
        let mut totals = PpoLosses::default();
        let mut count = 0.0;
        for _ in 0..self.config.epochs {
            order.shuffle(rng);
            for chunk in order.chunks(self.config.minibatch) {
                let mb = PpoBatch {
                    states: batch.states.select(Axis(0), chunk),
                    actions: batch.actions.select(Axis(0), chunk),
                    old_log_probs: batch.old_log_probs.select(Axis(0), chunk),
                    advantages: batch.advantages.select(Axis(0), chunk),
                    returns: batch.returns.select(Axis(0), chunk),
                };
                let pl = policy_loss_and_grads(&self.policy, &self.log_std, &mb, self.config.clip)?;
                let (vl, mut vg) = value_loss_and_grads(&self.value, mb.states.view(), &mb.returns)?;
                vg.scale(self.config.value_coef);
                self.policy_opt.step(&mut self.policy, &pl.net_grads);
                self.log_std_opt.step(&mut self.log_std, &pl.log_std_grads);
                self.value_opt.step(&mut self.value, &vg);
                totals.policy += pl.loss;
                totals.value += vl;
                totals.clip_fraction += pl.clip_fraction;
                count += 1.0;
            }
        }
        totals.policy /= count;
        totals.value /= count;
        totals.clip_fraction /= count;
        if !(totals.policy.is_finite() && totals.value.is_finite()) {
            return Err(Error::NonFinite("ppo loss"));
        }
        Ok(totals)
    }
}

fn normalize(xs: &[f64]) -> Vec<f64> {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let sd = (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt();
    xs.iter().map(|x| (x - m) / (sd + 1e-8)).collect()
}
