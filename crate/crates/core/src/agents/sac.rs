//! Off-policy maximum-entropy actor-critic.
//!
//! The actor emits a mean and an unconstrained log-std per action dimension;
//! actions are `tanh(mu + sigma * xi)` so they live in `[-1, 1]` and are
//! mapped affinely onto the task's bounds. Two critics with delayed copies
//! provide a min-of-two soft value backup. All gradients are analytic.

use ndarray::{concatenate, Array1, Array2, ArrayView2, Axis};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{softplus, Activation, Adam, Gradients, Mlp};
use crate::rng::{self, Rng};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SacConfig {
    pub hidden: Vec<usize>,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub batch_size: usize,
    pub alpha: f64,
    pub tau: f64,
    pub gamma: f64,
    pub target_update_every: u64,
    pub log_std_min: f64,
    pub log_std_max: f64,
    pub replay_capacity: usize,
}

impl Default for SacConfig {
    fn default() -> Self {
        SacConfig {
            hidden: vec![64, 64],
            actor_lr: 3e-4,
            critic_lr: 3e-4,
            batch_size: 128,
            alpha: 0.1,
            tau: 0.005,
            gamma: 0.99,
            target_update_every: 2,
            log_std_min: -5.0,
            log_std_max: 2.0,
            replay_capacity: 100_000,
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::Config("sac alpha must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.tau) || !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Config("sac tau and gamma must lie in [0, 1]".into()));
        }
        if self.batch_size == 0 || self.replay_capacity == 0 || self.target_update_every == 0 {
            return Err(Error::Config("sac batch, capacity and target period must be positive".into()));
        }
        if !(self.log_std_min < self.log_std_max) {
            return Err(Error::Config("log_std_min must be below log_std_max".into()));
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return Err(Error::Config("sac learning rates must be positive".into()));
        }
        Ok(())
    }
}

/// Affine map between the unit box and the task's action bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionScaler {
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

impl ActionScaler {
    pub fn to_env(&self, unit: &[f64]) -> Vec<f64> {
        unit.iter()
            .zip(self.low.iter().zip(&self.high))
            .map(|(&u, (&lo, &hi))| lo + 0.5 * (u + 1.0) * (hi - lo))
            .collect()
    }

    pub fn to_unit(&self, action: &[f64]) -> Vec<f64> {
        action
            .iter()
            .zip(self.low.iter().zip(&self.high))
            .map(|(&a, (&lo, &hi))| (2.0 * (a - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0))
            .collect()
    }
}

/// Minibatch with actions already in unit coordinates.
#[derive(Clone, Debug)]
pub struct SacBatch {
    pub states: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Array1<f64>,
    pub next_states: Array2<f64>,
    /// 1.0 for true terminal transitions.
    pub dones: Array1<f64>,
}

/// Reparameterized sample from the squashed Gaussian.
#[derive(Clone, Debug)]
pub struct PolicySample {
    pub raw_log_std: Array2<f64>,
    pub log_std: Array2<f64>,
    pub noise: Array2<f64>,
    pub action: Array2<f64>,
    pub log_prob: Array1<f64>,
}

pub fn bounded_log_std(raw: f64, lmin: f64, lmax: f64) -> f64 {
    lmin + 0.5 * (lmax - lmin) * (raw.tanh() + 1.0)
}

/// `ln(1 - tanh(u)^2)` evaluated without cancellation.
fn log_one_minus_tanh_sq(u: f64) -> f64 {
    2.0 * (std::f64::consts::LN_2 - u - softplus(-2.0 * u))
}

/// Turn actor outputs `[mu | raw]` and standard-normal noise into actions
/// and log-probabilities.
pub fn squashed_sample(out: &Array2<f64>, noise: &Array2<f64>, lmin: f64, lmax: f64) -> PolicySample {
    let d = noise.ncols();
    let mu = out.slice(ndarray::s![.., ..d]);
    let raw = out.slice(ndarray::s![.., d..]).to_owned();
    let log_std = raw.mapv(|r| bounded_log_std(r, lmin, lmax));
    let mut action = Array2::zeros(noise.raw_dim());
    let mut log_prob = Array1::zeros(noise.nrows());
    for i in 0..noise.nrows() {
        let mut lp = 0.0;
        for j in 0..d {
            let xi = noise[[i, j]];
            let ls = log_std[[i, j]];
            let u = mu[[i, j]] + ls.exp() * xi;
            action[[i, j]] = u.tanh();
            lp += -0.5 * xi * xi - ls - 0.5 * LN_2PI - log_one_minus_tanh_sq(u);
        }
        log_prob[i] = lp;
    }
    PolicySample {
        raw_log_std: raw,
        log_std,
        noise: noise.clone(),
        action,
        log_prob,
    }
}

pub fn standard_normal(rows: usize, cols: usize, rng: &mut Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.sample(StandardNormal))
}

fn hcat(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
    concatenate![Axis(1), a, b]
}

/// Soft Bellman targets `r + gamma (1 - done) (min Q_target(s', a') - alpha log pi(a'|s'))`.
pub fn critic_targets(
    actor: &Mlp,
    q1_target: &Mlp,
    q2_target: &Mlp,
    batch: &SacBatch,
    next_noise: &Array2<f64>,
    config: &SacConfig,
) -> Result<Array1<f64>> {
    let out = actor.forward(batch.next_states.view())?;
    let next = squashed_sample(&out, next_noise, config.log_std_min, config.log_std_max);
    let qin = hcat(batch.next_states.view(), next.action.view());
    let t1 = q1_target.forward(qin.view())?;
    let t2 = q2_target.forward(qin.view())?;
    let mut y = Array1::zeros(batch.rewards.len());
    for i in 0..y.len() {
        let v = t1[[i, 0]].min(t2[[i, 0]]) - config.alpha * next.log_prob[i];
        y[i] = batch.rewards[i] + config.gamma * (1.0 - batch.dones[i]) * v;
    }
    Ok(y)
}

/// Mean squared Bellman residual of one critic against fixed targets.
pub fn critic_loss_and_grads(
    q: &Mlp,
    states: ArrayView2<f64>,
    actions: ArrayView2<f64>,
    targets: &Array1<f64>,
) -> Result<(f64, Gradients)> {
    let qin = hcat(states, actions);
    let cache = q.forward_cached(qin.view())?;
    let pred = cache.output().column(0).to_owned();
    let n = targets.len() as f64;
    let resid = &pred - targets;
    let loss = resid.mapv(|r| r * r).sum() / n;
    let grad_out = resid.mapv(|r| 2.0 * r / n).insert_axis(Axis(1));
    let (grads, _) = q.backward(&cache, grad_out.view());
    Ok((loss, grads))
}

/// `mean(alpha log pi(a|s) - min(Q1, Q2)(s, a))` with `a` reparameterized by `noise`.
#[allow(clippy::too_many_arguments)]
pub fn actor_loss_and_grads(
    actor: &Mlp,
    q1: &Mlp,
    q2: &Mlp,
    states: ArrayView2<f64>,
    noise: &Array2<f64>,
    alpha: f64,
    lmin: f64,
    lmax: f64,
) -> Result<(f64, Gradients, PolicySample)> {
    let n = states.nrows();
    let d = noise.ncols();
    let cache = actor.forward_cached(states)?;
    let sample = squashed_sample(cache.output(), noise, lmin, lmax);
    let qin = hcat(states, sample.action.view());
    let c1 = q1.forward_cached(qin.view())?;
    let c2 = q2.forward_cached(qin.view())?;
    let nf = n as f64;
    let mut g1 = Array2::zeros((n, 1));
    let mut g2 = Array2::zeros((n, 1));
    let mut loss = 0.0;
    for i in 0..n {
        let (a, b) = (c1.output()[[i, 0]], c2.output()[[i, 0]]);
        if a <= b {
            g1[[i, 0]] = -1.0 / nf;
        } else {
            g2[[i, 0]] = -1.0 / nf;
        }
        loss += alpha * sample.log_prob[i] - a.min(b);
    }
    loss /= nf;
    let (_, gin1) = q1.backward(&c1, g1.view());
    let (_, gin2) = q2.backward(&c2, g2.view());
    let sdim = states.ncols();
    let mut grad_out = Array2::zeros((n, 2 * d));
    let half_range = 0.5 * (lmax - lmin);
    for i in 0..n {
        for j in 0..d {
            let a = sample.action[[i, j]];
            let sigma = sample.log_std[[i, j]].exp();
            let xi = noise[[i, j]];
            let g_a = gin1[[i, sdim + j]] + gin2[[i, sdim + j]];
            let du = 1.0 - a * a;
            let g_mu = alpha * 2.0 * a / nf + g_a * du;
            let g_ls = alpha * (-1.0 + 2.0 * a * sigma * xi) / nf + g_a * du * sigma * xi;
            let t = sample.raw_log_std[[i, j]].tanh();
            grad_out[[i, j]] = g_mu;
            grad_out[[i, d + j]] = g_ls * half_range * (1.0 - t * t);
        }
    }
    let (grads, _) = actor.backward(&cache, grad_out.view());
    Ok((loss, grads, sample))
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SacLosses {
    pub critic: f64,
    pub actor: f64,
    pub entropy: f64,
}

#[derive(Clone, Debug)]
pub struct SacAgent {
    pub actor: Mlp,
    pub q1: Mlp,
    pub q2: Mlp,
    pub q1_target: Mlp,
    pub q2_target: Mlp,
    actor_opt: Adam,
    q1_opt: Adam,
    q2_opt: Adam,
    config: SacConfig,
    scaler: ActionScaler,
    state_dim: usize,
    updates: u64,
    critic_generation: u64,
    seed: u64,
}

impl SacAgent {
    pub fn new(state_dim: usize, scaler: ActionScaler, config: SacConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let d = scaler.low.len();
        let mut sizes = vec![state_dim];
        sizes.extend(&config.hidden);
        sizes.push(2 * d);
        let mut r = rng::stream(seed, "actor-init");
        let actor = Mlp::new(&sizes, Activation::Relu, Activation::Identity, &mut r);
        let (q1, q2) = Self::fresh_critics(state_dim, d, &config, seed, 0);
        Ok(SacAgent {
            actor_opt: Adam::new(&actor, config.actor_lr),
            q1_opt: Adam::new(&q1, config.critic_lr),
            q2_opt: Adam::new(&q2, config.critic_lr),
            q1_target: q1.clone(),
            q2_target: q2.clone(),
            actor,
            q1,
            q2,
            config,
            scaler,
            state_dim,
            updates: 0,
            critic_generation: 0,
            seed,
        })
    }

    fn fresh_critics(state_dim: usize, d: usize, config: &SacConfig, seed: u64, generation: u64) -> (Mlp, Mlp) {
        let mut sizes = vec![state_dim + d];
        sizes.extend(&config.hidden);
        sizes.push(1);
        let mut r1 = rng::stream(seed, &format!("critic1-init-{generation}"));
        let mut r2 = rng::stream(seed, &format!("critic2-init-{generation}"));
        (
            Mlp::new(&sizes, Activation::Relu, Activation::Identity, &mut r1),
            Mlp::new(&sizes, Activation::Relu, Activation::Identity, &mut r2),
        )
    }

    /// Fresh critics, delayed copies and critic optimizers.
    pub fn reset_critic(&mut self) {
        self.critic_generation += 1;
        let (q1, q2) = Self::fresh_critics(
            self.state_dim,
            self.action_dim(),
            &self.config,
            self.seed,
            self.critic_generation,
        );
        self.q1_opt = Adam::new(&q1, self.config.critic_lr);
        self.q2_opt = Adam::new(&q2, self.config.critic_lr);
        self.q1_target = q1.clone();
        self.q2_target = q2.clone();
        self.q1 = q1;
        self.q2 = q2;
    }

    pub fn config(&self) -> &SacConfig {
        &self.config
    }

    pub fn scaler(&self) -> &ActionScaler {
        &self.scaler
    }

    pub fn action_dim(&self) -> usize {
        self.scaler.low.len()
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// Unit-box action: sampled, or `tanh(mu)` when deterministic.
    pub fn act_unit(&self, state: &[f64], rng: Option<&mut Rng>) -> Result<Vec<f64>> {
        let out = self.actor.forward_one(state)?;
        let d = self.action_dim();
        Ok(match rng {
            None => out[..d].iter().map(|m| m.tanh()).collect(),
            Some(r) => (0..d)
                .map(|j| {
                    let ls = bounded_log_std(out[d + j], self.config.log_std_min, self.config.log_std_max);
                    let xi: f64 = r.sample(StandardNormal);
                    (out[j] + ls.exp() * xi).tanh()
                })
                .collect(),
        })
    }

    pub fn act(&self, state: &[f64], rng: Option<&mut Rng>) -> Result<Vec<f64>> {
        Ok(self.scaler.to_env(&self.act_unit(state, rng)?))
    }

    /// One critic step, one actor step, and a delayed-copy update every
    /// `target_update_every` calls.
    pub fn update(&mut self, batch: &SacBatch, rng: &mut Rng) -> Result<SacLosses> {
        let n = batch.states.nrows();
        let d = self.action_dim();
        let next_noise = standard_normal(n, d, rng);
        let y = critic_targets(&self.actor, &self.q1_target, &self.q2_target, batch, &next_noise, &self.config)?;
        let (l1, g1) = critic_loss_and_grads(&self.q1, batch.states.view(), batch.actions.view(), &y)?;
        let (l2, g2) = critic_loss_and_grads(&self.q2, batch.states.view(), batch.actions.view(), &y)?;
        self.q1_opt.step(&mut self.q1, &g1);
        self.q2_opt.step(&mut self.q2, &g2);

        let noise = standard_normal(n, d, rng);
        let (la, ga, sample) = actor_loss_and_grads(
            &self.actor,
            &self.q1,
            &self.q2,
            batch.states.view(),
            &noise,
            self.config.alpha,
            self.config.log_std_min,
            self.config.log_std_max,
        )?;
        self.actor_opt.step(&mut self.actor, &ga);

        self.updates += 1;
        if self.updates % self.config.target_update_every == 0 {
            self.q1_target.soft_update_from(&self.q1, self.config.tau);
            self.q2_target.soft_update_from(&self.q2, self.config.tau);
        }
        let losses = SacLosses {
            critic: l1 + l2,
            actor: la,
            entropy: -sample.log_prob.mean().unwrap_or(0.0),
        };
        if !(losses.critic.is_finite() && losses.actor.is_finite()) {
            return Err(Error::NonFinite("sac loss"));
        }
        Ok(losses)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> SacConfig {
        SacConfig {
            hidden: vec![5],
            ..SacConfig::default()
        }
    }

    fn tiny_agent(seed: u64) -> SacAgent {
        let scaler = ActionScaler {
            low: vec![-1.0, -2.0],
            high: vec![1.0, 2.0],
        };
        SacAgent::new(3, scaler, tiny_config(), seed).unwrap()
    }

    fn batch(n: usize, rng: &mut Rng) -> SacBatch {
        let u = |rng: &mut Rng, r, c| Array2::from_shape_simple_fn((r, c), || rng.random_range(-1.0..1.0));
        SacBatch {
            states: u(rng, n, 3),
            actions: u(rng, n, 2),
            rewards: Array1::from_shape_simple_fn(n, || rng.random_range(-1.0..1.0)),
            next_states: u(rng, n, 3),
            dones: Array1::zeros(n),
        }
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
    }

    fn check_fd(net: &Mlp, analytic: &Gradients, loss: impl Fn(&Mlp) -> f64) {
        let params = net.params_flat();
        let grads = analytic.to_flat();
        let h = 1e-6;
        for k in 0..params.len() {
            let mut p = params.clone();
            p[k] += h;
            let mut plus = net.clone();
            plus.set_params_flat(&p).unwrap();
            p[k] -= 2.0 * h;
            let mut minus = net.clone();
            minus.set_params_flat(&p).unwrap();
            let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
            assert!(
                rel_err(fd, grads[k]) < 1e-4 || (fd - grads[k]).abs() < 1e-9,
                "param {k}: fd {fd} analytic {}",
                grads[k]
            );
        }
    }

    #[test]
    fn scaler_roundtrip() {
        let s = ActionScaler {
            low: vec![-2.0, 0.0],
            high: vec![2.0, 1.0],
        };
        assert_eq!(s.to_env(&[1.0, -1.0]), vec![2.0, 0.0]);
        assert_eq!(s.to_unit(&[0.0, 0.5]), vec![0.0, 0.0]);
    }

    #[test]
    fn log_prob_matches_change_of_variables() {
        let out = Array2::from_shape_vec((1, 2), vec![0.3, 0.2]).unwrap();
        let noise = Array2::from_shape_vec((1, 1), vec![-0.7]).unwrap();
        let s = squashed_sample(&out, &noise, -5.0, 2.0);
        let ls = bounded_log_std(0.2, -5.0, 2.0);
        let u = 0.3 + ls.exp() * -0.7;
        let gauss = -0.5 * 0.49 - ls - 0.5 * (2.0 * std::f64::consts::PI).ln();
        let direct = gauss - (1.0 - u.tanh().powi(2)).ln();
        assert!((s.log_prob[0] - direct).abs() < 1e-10);
    }

    #[test]
    fn critic_gradient_matches_finite_differences() {
        let agent = tiny_agent(1);
        let mut r = rng::from_seed(2);
        let b = batch(6, &mut r);
        let y = Array1::from_shape_simple_fn(6, || r.random_range(-1.0..1.0));
        let (_, g) = critic_loss_and_grads(&agent.q1, b.states.view(), b.actions.view(), &y).unwrap();
        check_fd(&agent.q1, &g, |net| {
            critic_loss_and_grads(net, b.states.view(), b.actions.view(), &y).unwrap().0
        });
    }

    #[test]
    fn actor_gradient_matches_finite_differences() {
        let agent = tiny_agent(3);
        let mut r = rng::from_seed(4);
        let b = batch(5, &mut r);
        let noise = standard_normal(5, 2, &mut r);
        let (_, g, _) =
            actor_loss_and_grads(&agent.actor, &agent.q1, &agent.q2, b.states.view(), &noise, 0.1, -5.0, 2.0).unwrap();
        check_fd(&agent.actor, &g, |net| {
            actor_loss_and_grads(net, &agent.q1, &agent.q2, b.states.view(), &noise, 0.1, -5.0, 2.0)
                .unwrap()
                .0
        });
    }

    #[test]
    fn myopic_and_terminal_targets_reduce_to_reward() {
        let agent = tiny_agent(5);
        let mut r = rng::from_seed(6);
        let mut b = batch(8, &mut r);
        let noise = standard_normal(8, 2, &mut r);
        let myopic = SacConfig {
            gamma: 0.0,
            ..tiny_config()
        };
        let y = critic_targets(&agent.actor, &agent.q1_target, &agent.q2_target, &b, &noise, &myopic).unwrap();
        assert_eq!(y, b.rewards);
        b.dones.fill(1.0);
        let y = critic_targets(&agent.actor, &agent.q1_target, &agent.q2_target, &b, &noise, &tiny_config()).unwrap();
        assert_eq!(y, b.rewards);
    }

    #[test]
    fn myopic_critic_regresses_to_reward() {
        let mut agent = SacAgent::new(
            1,
            ActionScaler {
                low: vec![-1.0],
                high: vec![1.0],
            },
            SacConfig {
                hidden: vec![16],
                gamma: 0.0,
                critic_lr: 1e-2,
                ..SacConfig::default()
            },
            7,
        )
        .unwrap();
        let mut r = rng::from_seed(8);
        let states = Array2::from_shape_simple_fn((32, 1), || r.random_range(-1.0..1.0));
        let actions = Array2::from_shape_simple_fn((32, 1), || r.random_range(-1.0..1.0));
        let rewards = states.column(0).mapv(|s| 0.5 * s);
        let b = SacBatch {
            next_states: states.clone(),
            dones: Array1::zeros(32),
            states,
            actions,
            rewards: rewards.clone(),
        };
        let mut last = f64::INFINITY;
        for _ in 0..1500 {
            last = agent.update(&b, &mut r).unwrap().critic;
        }
        assert!(last < 2e-3, "critic loss {last}");
    }

    #[test]
    fn zero_temperature_follows_q_gradient() {
        let agent = tiny_agent(9);
        let mut r = rng::from_seed(10);
        let b = batch(1, &mut r);
        let noise = Array2::zeros((1, 2));
        let (_, grads, _) =
            actor_loss_and_grads(&agent.actor, &agent.q1, &agent.q2, b.states.view(), &noise, 0.0, -5.0, 2.0).unwrap();
        let out = agent.actor.forward(b.states.view()).unwrap();
        let min_q = |mu: [f64; 2]| {
            let mut x = b.states.row(0).to_vec();
            x.extend(mu.iter().map(|m| m.tanh()));
            let q1 = agent.q1.forward_one(&x).unwrap()[0];
            let q2 = agent.q2.forward_one(&x).unwrap()[0];
            q1.min(q2)
        };
        let mu = [out[[0, 0]], out[[0, 1]]];
        let h = 1e-6;
        for j in 0..2 {
            let (mut p, mut m) = (mu, mu);
            p[j] += h;
            m[j] -= h;
            let ascent = (min_q(p) - min_q(m)) / (2.0 * h);
            // identity output layer: the bias gradient of unit j is dL/dmu_j
            let dl_dmu = grads.layers.last().unwrap().1[j];
            assert!((dl_dmu + ascent).abs() < 1e-6, "dim {j}: {dl_dmu} vs -{ascent}");
        }
    }

    #[test]
    fn higher_temperature_keeps_more_entropy() {
        let mut r = rng::from_seed(11);
        let b = batch(64, &mut r);
        let entropy_after = |alpha: f64| {
            let mut agent = tiny_agent(12);
            let mut opt = Adam::new(&agent.actor, 1e-2);
            let mut nr = rng::from_seed(13);
            for _ in 0..200 {
                let noise = standard_normal(64, 2, &mut nr);
                let (_, g, _) = actor_loss_and_grads(
                    &agent.actor, &agent.q1, &agent.q2, b.states.view(), &noise, alpha, -5.0, 2.0,
                )
                .unwrap();
                opt.step(&mut agent.actor, &g);
            }
            let noise = standard_normal(64, 2, &mut nr);
            let out = agent.actor.forward(b.states.view()).unwrap();
            -squashed_sample(&out, &noise, -5.0, 2.0).log_prob.mean().unwrap()
        };
        assert!(entropy_after(1.0) > entropy_after(0.01));
    }

    #[test]
    fn delayed_copies_move_by_exact_ema() {
        let mut agent = tiny_agent(14);
        let mut r = rng::from_seed(15);
        let b = batch(8, &mut r);
        let before = agent.q1_target.params_flat();
        agent.update(&b, &mut r).unwrap();
        assert_eq!(agent.q1_target.params_flat(), before, "no target move on odd steps");
        agent.update(&b, &mut r).unwrap();
        let online = agent.q1.params_flat();
        let after = agent.q1_target.params_flat();
        let tau = agent.config().tau;
        for ((a, o), n) in before.iter().zip(&online).zip(&after) {
            assert_eq!(*n, (1.0 - tau) * a + tau * o);
        }
    }

    #[test]
    fn updates_are_deterministic() {
        let run = || {
            let mut agent = tiny_agent(16);
            let mut r = rng::from_seed(17);
            let b = batch(8, &mut r);
            for _ in 0..5 {
                agent.update(&b, &mut r).unwrap();
            }
            agent.actor.params_flat()
        };
        assert_eq!(run(), run());
    }
}
