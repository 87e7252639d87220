//! The full preference-learning loop: unsupervised pre-training, then policy
//! learning interleaved with feedback sessions every `session_period` steps.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::collect::{evaluate, Collector, Evaluation};
use super::explore::{intrinsic_rewards, ExploreConfig};
use super::ppo::{PpoAgent, PpoConfig, Rollout, RolloutStep};
use super::replay::ReplayBuffer;
use super::sac::{ActionScaler, SacAgent, SacBatch, SacConfig};
use crate::envsim::{make_task, slice_segments, EnvInstance, EnvSpec, Metric, Segment, TaskOptions};
use crate::error::{Error, Result};
use crate::evalstats::{CurveRow, RunRecord};
use crate::reward_model::{reward_input, AnnotationStore, RewardEnsemble, RewardModelConfig};
use crate::rng::{self, Rng};
use crate::sampler::{QuerySampler, SamplerConfig};
use crate::schedule::{self, ScheduleConfig, ScheduleKind};
use crate::teacher::{self, PreferenceLabel, PreferenceRecord, SimTeacher, TeacherConfig, ThresholdContext};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algo {
    #[default]
    Pebble,
    Prefppo,
    SacGt,
    PpoGt,
}

impl Algo {
    pub const ALL: [Algo; 4] = [Algo::Pebble, Algo::Prefppo, Algo::SacGt, Algo::PpoGt];

    pub fn name(self) -> &'static str {
        match self {
            Algo::Pebble => "pebble",
            Algo::Prefppo => "prefppo",
            Algo::SacGt => "sac_gt",
            Algo::PpoGt => "ppo_gt",
        }
    }

    pub fn uses_preferences(self) -> bool {
        matches!(self, Algo::Pebble | Algo::Prefppo)
    }

    pub fn off_policy(self) -> bool {
        matches!(self, Algo::Pebble | Algo::SacGt)
    }

    /// The ground-truth-reward learner of the same family.
    pub fn baseline(self) -> Algo {
        if self.off_policy() {
            Algo::SacGt
        } else {
            Algo::PpoGt
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algo::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Unknown {
                kind: "algo",
                name: s.to_string(),
            })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub env: String,
    pub task: TaskOptions,
    pub algo: Algo,
    /// Label recorded in outputs; the behaviour comes from `teacher`.
    pub teacher_name: String,
    pub teacher: TeacherConfig,
    pub sampler: SamplerConfig,
    pub schedule: ScheduleKind,
    pub schedule_exponent: Option<f64>,
    pub budget: usize,
    /// Agent steps between feedback sessions.
    pub session_period: usize,
    /// Agent steps including pre-training.
    pub total_steps: usize,
    pub segment_len: usize,
    pub segment_stride: usize,
    /// Finished episodes kept as the segment source.
    pub recent_episodes: usize,
    /// Finished episodes averaged for adaptive teacher thresholds.
    pub r_avg_window: usize,
    pub reward_model: RewardModelConfig,
    pub sac: SacConfig,
    pub ppo: PpoConfig,
    pub explore: ExploreConfig,
    pub eval_every: usize,
    pub eval_episodes: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            env: "point_mass".into(),
            task: TaskOptions::default(),
            algo: Algo::Pebble,
            teacher_name: "oracle".into(),
            teacher: TeacherConfig::default(),
            sampler: SamplerConfig::default(),
            schedule: ScheduleKind::Uniform,
            schedule_exponent: None,
            budget: 100,
            session_period: 2000,
            total_steps: 20_000,
            segment_len: 25,
            segment_stride: 5,
            recent_episodes: 100,
            r_avg_window: 10,
            reward_model: RewardModelConfig::default(),
            sac: SacConfig::default(),
            ppo: PpoConfig::default(),
            explore: ExploreConfig::default(),
            eval_every: 2000,
            eval_episodes: 10,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn horizon(&self) -> usize {
        self.total_steps.saturating_sub(self.explore.pretrain_steps)
    }

    pub fn schedule_config(&self, episode_len: usize) -> ScheduleConfig {
        ScheduleConfig {
            kind: self.schedule,
            total_budget: self.budget,
            session_period: self.session_period,
            episode_len,
            horizon: self.horizon(),
            exponent: self.schedule_exponent,
        }
    }

    /// Per-session query counts, all zero for ground-truth learners or a zero budget.
    pub fn query_plan(&self, episode_len: usize) -> Result<Vec<usize>> {
        let cfg = self.schedule_config(episode_len);
        if !self.algo.uses_preferences() || self.budget == 0 {
            return Ok(vec![0; cfg.sessions()]);
        }
        schedule::plan(&cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let task = make_task(&self.env, &self.task)?;
        let spec = task.spec();
        self.teacher.validate()?;
        self.sampler.validate()?;
        self.reward_model.validate()?;
        self.sac.validate()?;
        self.ppo.validate()?;
        self.explore.validate()?;
        if self.explore.pretrain_steps >= self.total_steps {
            return Err(Error::Config(format!(
                "total_steps ({}) must exceed pretrain_steps ({})",
                self.total_steps, self.explore.pretrain_steps
            )));
        }
        if self.session_period == 0 || self.eval_every == 0 || self.eval_episodes == 0 {
            return Err(Error::Config("session_period, eval_every and eval_episodes must be positive".into()));
        }
        if self.segment_len == 0 || self.segment_len > spec.episode_len || self.segment_stride == 0 {
            return Err(Error::Config(format!(
                "segment_len must be in 1..={} and stride positive",
                spec.episode_len
            )));
        }
        self.query_plan(spec.episode_len)?;
        Ok(())
    }

    pub fn run_id(&self) -> String {
        format!(
            "{}-{}-{}-b{}-s{}",
            self.env, self.algo, self.teacher_name, self.budget, self.seed
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionLog {
    pub step: u64,
    pub planned: usize,
    pub asked: usize,
    pub answered: usize,
    pub skipped: usize,
    pub equal: usize,
    /// The remaining budget could not cover the planned count.
    pub truncated: bool,
    pub reward_loss: Option<f64>,
    pub disagreement: Option<f64>,
    /// Agent buffer size right after the session.
    pub buffer_len_after: usize,
}

pub struct TrainOutput {
    pub record: RunRecord,
    /// Every issued query including skipped ones, in order.
    pub preferences: Vec<PreferenceRecord>,
    pub sessions: Vec<SessionLog>,
    pub ensemble: Option<RewardEnsemble>,
    pub final_eval: Evaluation,
    pub exact_ties: u64,
}

struct Feedback {
    ensemble: RewardEnsemble,
    store: AnnotationStore,
    teacher: SimTeacher,
    sampler: QuerySampler,
    plan: Vec<usize>,
    used: usize,
    budget: usize,
    issued: Vec<PreferenceRecord>,
    sessions: Vec<SessionLog>,
    last_loss: Option<f64>,
    last_disagreement: Option<f64>,
}

impl Feedback {
    fn new(cfg: &TrainConfig, spec: &EnvSpec) -> Result<Self> {
        let mut tcfg = cfg.teacher.clone();
        tcfg.rng_seed = rng::derive_seed(cfg.seed, "teacher");
        let mut scfg = cfg.sampler.clone();
        scfg.rng_seed = rng::derive_seed(cfg.seed, "sampler");
        Ok(Feedback {
            ensemble: RewardEnsemble::new(
                spec.state_dim,
                spec.action_dim,
                cfg.reward_model.clone(),
                rng::derive_seed(cfg.seed, "reward-model"),
            )?,
            store: AnnotationStore::new(),
            teacher: SimTeacher::new(tcfg)?,
            sampler: QuerySampler::new(scfg)?,
            plan: cfg.query_plan(spec.episode_len)?,
            used: 0,
            budget: cfg.budget,
            issued: Vec::new(),
            sessions: Vec::new(),
            last_loss: None,
            last_disagreement: None,
        })
    }

    /// Ask the session's queries and retrain. Returns whether the ensemble changed.
    fn session(&mut self, index: usize, step: u64, collector: &Collector, cfg: &TrainConfig) -> Result<(bool, SessionLog)> {
        let planned = self.plan.get(index).copied().unwrap_or(0);
        let n = planned.min(self.budget - self.used);
        let mut log = SessionLog {
            step,
            planned,
            asked: 0,
            answered: 0,
            skipped: 0,
            equal: 0,
            truncated: n < planned,
            reward_loss: None,
            disagreement: None,
            buffer_len_after: 0,
        };
        if n == 0 {
            return Ok((false, log));
        }
        let mut segments: Vec<Segment> = Vec::new();
        for ep in collector.recent_episodes() {
            if ep.len() >= cfg.segment_len {
                segments.extend(slice_segments(ep, cfg.segment_len, cfg.segment_stride)?);
            }
        }
        if segments.len() < 2 {
            return Ok((false, log));
        }
        let selection = self.sampler.select(&segments, &self.ensemble, n)?;
        let ctx = ThresholdContext {
            avg_return: collector.recent_mean_return(cfg.r_avg_window).unwrap_or(0.0),
            segment_len: cfg.segment_len,
            episode_len: collector.spec().episode_len,
        };
        for &(i, j) in &selection.pairs {
            let label = self.teacher.label(&segments[i], &segments[j], &ctx)?;
            match label {
                PreferenceLabel::Skipped => log.skipped += 1,
                PreferenceLabel::Equal => log.equal += 1,
                _ => {}
            }
            let record = PreferenceRecord {
                seg0: segments[i].clone(),
                seg1: segments[j].clone(),
                label,
                query_step: step,
            };
            self.issued.push(record.clone());
            if self.store.push(record)? {
                log.answered += 1;
            }
        }
        log.asked = selection.pairs.len();
        self.used += log.asked;
        self.last_disagreement = selection.mean_disagreement;
        log.disagreement = selection.mean_disagreement;
        if self.store.is_empty() {
            return Ok((false, log));
        }
        let rm = &cfg.reward_model;
        let stats = self.ensemble.train(&self.store, rm.epochs, rm.batch_size)?;
        self.last_loss = Some(stats.mean_loss());
        log.reward_loss = self.last_loss;
        Ok((true, log))
    }
}

fn row_matrix<'a>(rows: impl ExactSizeIterator<Item = &'a [f64]>, cols: usize) -> Array2<f64> {
    let n = rows.len();
    let mut m = Array2::zeros((n, cols));
    for (i, r) in rows.enumerate() {
        m.row_mut(i).assign(&ArrayView1::from(r));
    }
    m
}

fn sac_batch(buffer: &ReplayBuffer, idx: &[usize], scaler: &ActionScaler, rewards: Option<&[f64]>) -> SacBatch {
    let items: Vec<_> = idx.iter().map(|&i| buffer.get(i).expect("index in range")).collect();
    let sd = items[0].transition.state.len();
    let ad = scaler.low.len();
    let units: Vec<Vec<f64>> = items.iter().map(|t| scaler.to_unit(&t.transition.action)).collect();
    SacBatch {
        states: row_matrix(items.iter().map(|t| &t.transition.state[..]), sd),
        actions: row_matrix(units.iter().map(|u| &u[..]), ad),
        rewards: match rewards {
            Some(r) => Array1::from(r.to_vec()),
            None => items.iter().map(|t| t.reward_learned).collect(),
        },
        next_states: row_matrix(items.iter().map(|t| &t.transition.next_state[..]), sd),
        dones: items.iter().map(|t| if t.transition.done { 1.0 } else { 0.0 }).collect(),
    }
}

fn random_action(spec: &EnvSpec, rng: &mut Rng) -> Vec<f64> {
    spec.action_low
        .iter()
        .zip(&spec.action_high)
        .map(|(&lo, &hi)| rng.random_range(lo..=hi))
        .collect()
}

fn scaler_for(spec: &EnvSpec) -> ActionScaler {
    ActionScaler {
        low: spec.action_low.clone(),
        high: spec.action_high.clone(),
    }
}

/// Unsupervised off-policy pre-training: `seed_steps` random actions, then
/// actor-critic updates on the k-NN state-entropy reward of each sampled
/// successor state against every state in the buffer.
pub fn pretrain_sac(
    agent: &mut SacAgent,
    collector: &mut Collector,
    buffer: &mut ReplayBuffer,
    cfg: &ExploreConfig,
    rng: &mut Rng,
) -> Result<()> {
    let spec = collector.spec().clone();
    let batch = agent.config().batch_size;
    for t in 0..cfg.pretrain_steps {
        let action = if t < cfg.seed_steps {
            random_action(&spec, rng)
        } else {
            agent.act(collector.state(), Some(rng))?
        };
        let tr = collector.step(&action)?;
        buffer.push(tr, 0.0);
        if t >= cfg.seed_steps && buffer.len() > cfg.k && buffer.len() >= batch {
            let idx = buffer.sample_indices(batch, rng);
            let all = buffer.states();
            let next = row_matrix(
                idx.iter().map(|&i| &buffer.get(i).expect("index in range").transition.next_state[..]),
                spec.state_dim,
            );
            let r = intrinsic_rewards(next.view(), all.view(), cfg.k, cfg.distance_floor)?;
            let b = sac_batch(buffer, &idx, agent.scaler(), Some(&r));
            agent.update(&b, rng)?;
        }
    }
    Ok(())
}

/// Unsupervised on-policy pre-training on rollout-local state entropy.
pub fn pretrain_ppo(agent: &mut PpoAgent, collector: &mut Collector, cfg: &ExploreConfig, rng: &mut Rng) -> Result<()> {
    let mut rollout = Rollout::default();
    let len = agent.config().rollout_len;
    for t in 0..cfg.pretrain_steps {
        let (raw, lp) = agent.act(collector.state(), Some(rng))?;
        let tr = collector.step(&raw)?;
        rollout.steps.push(RolloutStep {
            transition: tr,
            raw_action: raw,
            log_prob: lp,
        });
        if rollout.len() == len || t + 1 == cfg.pretrain_steps {
            if rollout.len() > cfg.k {
                let sd = collector.spec().state_dim;
                let states = row_matrix(rollout.steps.iter().map(|s| &s.transition.state[..]), sd);
                let next = row_matrix(rollout.steps.iter().map(|s| &s.transition.next_state[..]), sd);
                let r = intrinsic_rewards(next.view(), states.view(), cfg.k, cfg.distance_floor)?;
                let batch = agent.prepare(&rollout, &r)?;
                agent.update(&batch, rng)?;
            }
            rollout.clear();
        }
    }
    Ok(())
}

struct Progress {
    curve: Vec<CurveRow>,
    eval_seed: u64,
}

impl Progress {
    fn record<F>(&mut self, cfg: &TrainConfig, step: u64, fb: Option<&Feedback>, policy: F) -> Result<()>
    where
        F: FnMut(&[f64]) -> Result<Vec<f64>>,
    {
        let ev = evaluate(&cfg.env, &cfg.task, cfg.eval_episodes, self.eval_seed, policy)?;
        self.curve.push(CurveRow {
            step,
            true_return: ev.mean_return(),
            success: ev.success_rate(),
            queries_used: fb.map_or(0, |f| f.used),
            reward_loss: fb.and_then(|f| f.last_loss),
            ensemble_disagreement: fb.and_then(|f| f.last_disagreement),
        });
        Ok(())
    }
}

fn agent_reward(ensemble: &RewardEnsemble, state: &[f64], action: &[f64]) -> Result<f64> {
    let x = reward_input(state, action);
    let m = row_matrix(std::iter::once(&x[..]), x.len());
    Ok(ensemble.agent_rewards(m.view())?[0])
}

/// Run one seeded experiment end to end.
pub fn train_preference_rl(cfg: &TrainConfig) -> Result<TrainOutput> {
    cfg.validate()?;
    let env = EnvInstance::new(make_task(&cfg.env, &cfg.task)?);
    let spec = env.spec().clone();
    let mut collector = Collector::new(env, rng::derive_seed(cfg.seed, "env"), cfg.recent_episodes);
    let mut fb = if cfg.algo.uses_preferences() {
        Some(Feedback::new(cfg, &spec)?)
    } else {
        None
    };
    let mut progress = Progress {
        curve: Vec::new(),
        eval_seed: rng::derive_seed(cfg.seed, "eval"),
    };
    let mut arng = rng::stream(cfg.seed, "agent");
    let pre = cfg.explore.pretrain_steps;
    let horizon = cfg.horizon();
    let final_seed = rng::derive_seed(cfg.seed, "final-eval");

    let final_eval = if cfg.algo.off_policy() {
        let mut agent = SacAgent::new(spec.state_dim, scaler_for(&spec), cfg.sac.clone(), rng::derive_seed(cfg.seed, "agent-init"))?;
        let mut buffer = ReplayBuffer::new(cfg.sac.replay_capacity)?;
        pretrain_sac(&mut agent, &mut collector, &mut buffer, &cfg.explore, &mut arng)?;
        agent.reset_critic();
        match &fb {
            Some(f) => buffer.relabel(&f.ensemble)?,
            None => buffer.relabel_true(),
        };
        progress.record(cfg, pre as u64, fb.as_ref(), |s| agent.act(s, None))?;
        for t in 0..horizon {
            let global = (pre + t) as u64;
            if t % cfg.session_period == 0 {
                if let Some(f) = fb.as_mut() {
                    let (changed, mut log) = f.session(t / cfg.session_period, global, &collector, cfg)?;
                    if changed {
                        buffer.relabel(&f.ensemble)?;
                    }
                    log.buffer_len_after = buffer.len();
                    f.sessions.push(log);
                }
            }
            let action = agent.act(collector.state(), Some(&mut arng))?;
            let tr = collector.step(&action)?;
            let r = match &fb {
                Some(f) => agent_reward(&f.ensemble, &tr.state, &tr.action)?,
                None => tr.reward_true,
            };
            buffer.push(tr, r);
            if buffer.len() >= cfg.sac.batch_size {
                let idx = buffer.sample_indices(cfg.sac.batch_size, &mut arng);
                let b = sac_batch(&buffer, &idx, agent.scaler(), None);
                agent.update(&b, &mut arng)?;
            }
            let step = global + 1;
            if step % cfg.eval_every as u64 == 0 || step == cfg.total_steps as u64 {
                progress.record(cfg, step, fb.as_ref(), |s| agent.act(s, None))?;
            }
        }
        evaluate(&cfg.env, &cfg.task, cfg.eval_episodes, final_seed, |s| agent.act(s, None))?
    } else {
        let mut agent = PpoAgent::new(spec.state_dim, spec.action_dim, cfg.ppo.clone(), rng::derive_seed(cfg.seed, "agent-init"))?;
        pretrain_ppo(&mut agent, &mut collector, &cfg.explore, &mut arng)?;
        let mut rollout = Rollout::default();
        let greedy = |agent: &PpoAgent, s: &[f64]| agent.act(s, None).map(|(a, _)| a);
        progress.record(cfg, pre as u64, fb.as_ref(), |s| greedy(&agent, s))?;
        for t in 0..horizon {
            let global = (pre + t) as u64;
            if t % cfg.session_period == 0 {
                if let Some(f) = fb.as_mut() {
                    let (_, mut log) = f.session(t / cfg.session_period, global, &collector, cfg)?;
                    rollout.clear();
                    log.buffer_len_after = rollout.len();
                    f.sessions.push(log);
                }
            }
            let (raw, lp) = agent.act(collector.state(), Some(&mut arng))?;
            let tr = collector.step(&raw)?;
            rollout.steps.push(RolloutStep {
                transition: tr,
                raw_action: raw,
                log_prob: lp,
            });
            if rollout.len() == cfg.ppo.rollout_len {
                let rewards: Vec<f64> = match &fb {
                    Some(f) => {
                        let rows: Vec<Vec<f64>> = rollout
                            .steps
                            .iter()
                            .map(|s| reward_input(&s.transition.state, &s.transition.action))
                            .collect();
                        let m = row_matrix(rows.iter().map(|r| &r[..]), f.ensemble.input_dim());
                        f.ensemble.agent_rewards(m.view())?.to_vec()
                    }
                    None => rollout.steps.iter().map(|s| s.transition.reward_true).collect(),
                };
                let batch = agent.prepare(&rollout, &rewards)?;
                agent.update(&batch, &mut arng)?;
                rollout.clear();
            }
            let step = global + 1;
            if step % cfg.eval_every as u64 == 0 || step == cfg.total_steps as u64 {
                progress.record(cfg, step, fb.as_ref(), |s| greedy(&agent, s))?;
            }
        }
        evaluate(&cfg.env, &cfg.task, cfg.eval_episodes, final_seed, |s| greedy(&agent, s))?
    };

    let (preferences, sessions, ensemble, exact_ties) = match fb {
        Some(f) => {
            let ties = f.teacher.exact_ties();
            (f.issued, f.sessions, Some(f.ensemble), ties)
        }
        None => (Vec::new(), Vec::new(), None, 0),
    };
    let record = RunRecord {
        run_id: cfg.run_id(),
        seed: cfg.seed,
        teacher: cfg.teacher_name.clone(),
        algo: cfg.algo.name().into(),
        env: cfg.env.clone(),
        budget: cfg.budget,
        metric: spec.metric,
        curve: progress.curve,
        final_returns: final_eval.returns.clone(),
        final_successes: if spec.metric == Metric::SuccessRate {
            final_eval.successes.clone()
        } else {
            Vec::new()
        },
    };
    record.check_invariants()?;
    Ok(TrainOutput {
        record,
        preferences,
        sessions,
        ensemble,
        final_eval,
        exact_ties,
    })
}

/// Teacher config for a named preset, with the name recorded.
pub fn with_teacher(mut cfg: TrainConfig, name: &str) -> Result<TrainConfig> {
    cfg.teacher = teacher::preset(name)?;
    cfg.teacher_name = name.to_string();
    Ok(cfg)
}
