//! Preference-trained reward ensemble.
//!
//! Each member maps a `(state, action)` pair to a reward in `(-1, 1)`. The
//! probability that segment 1 is preferred to segment 0 is the logistic of
//! the difference of the two predicted segment sums, and members are trained
//! with cross-entropy against the teacher's (possibly soft) labels.

use ndarray::{Array1, Array2, ArrayView2};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envsim::Segment;
use crate::error::{Error, Result};
use crate::nn::{sigmoid, softplus, Activation, Adam, Gradients, Mlp, MlpCheckpoint};
use crate::rng::{self, Rng};
use crate::teacher::{PreferenceLabel, PreferenceRecord};

/// How the agent's per-step reward is read off the ensemble.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardReadout {
    #[default]
    Mean,
    First,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardModelConfig {
    pub hidden: Vec<usize>,
    pub ensemble_size: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub label_smoothing: bool,
    pub readout: RewardReadout,
    /// Re-initialise members before every training session.
    pub cold_start: bool,
}

impl Default for RewardModelConfig {
    fn default() -> Self {
        RewardModelConfig {
            hidden: vec![64, 64],
            ensemble_size: 3,
            lr: 3e-4,
            epochs: 50,
            batch_size: 32,
            label_smoothing: false,
            readout: RewardReadout::Mean,
            cold_start: false,
        }
    }
}

impl RewardModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ensemble_size == 0 {
            return Err(Error::Config("ensemble_size must be >= 1".into()));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config("reward epochs and batch_size must be >= 1".into()));
        }
        if !(self.lr > 0.0) {
            return Err(Error::Config("reward lr must be positive".into()));
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::Config("hidden layer sizes must be positive".into()));
        }
        Ok(())
    }
}

/// Dataset of answered (non-skipped) queries.
#[derive(Clone, Debug, Default)]
pub struct AnnotationStore {
    records: Vec<PreferenceRecord>,
    capacity: Option<usize>,
}

impl AnnotationStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Keeps at most `capacity` records, evicting the oldest first.
    pub fn with_capacity_limit(capacity: usize) -> Self {
        AnnotationStore {
            records: Vec::new(),
            capacity: Some(capacity),
        }
    }

    /// Add a record. Skipped queries are dropped and `Ok(false)` returned.
    pub fn push(&mut self, record: PreferenceRecord) -> Result<bool> {
        if record.label == PreferenceLabel::Skipped {
            return Ok(false);
        }
        if record.seg0.len() != record.seg1.len() || record.seg0.is_empty() {
            return Err(Error::InvalidArgument("segment pair must share a non-zero length".into()));
        }
        if let Some(first) = self.records.first() {
            if first.seg0.len() != record.seg0.len() {
                return Err(Error::DimMismatch {
                    expected: first.seg0.len(),
                    got: record.seg0.len(),
                });
            }
        }
        self.records.push(record);
        if let Some(cap) = self.capacity {
            if self.records.len() > cap {
                let excess = self.records.len() - cap;
                self.records.drain(..excess);
            }
        }
        Ok(true)
    }

    pub fn records(&self) -> &[PreferenceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Row `[state | action]` fed to a reward network.
pub fn reward_input(state: &[f64], action: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(state.len() + action.len());
    v.extend_from_slice(state);
    v.extend_from_slice(action);
    v
}

fn segment_rows(seg: &Segment, out: &mut Vec<f64>) {
    for s in &seg.steps {
        out.extend_from_slice(&s.state);
        out.extend_from_slice(&s.action);
    }
}

fn pair_matrix(pairs: &[(&Segment, &Segment)], width: usize) -> Result<Array2<f64>> {
    let rows: usize = pairs.iter().map(|(a, b)| a.len() + b.len()).sum();
    let mut data = Vec::with_capacity(rows * width);
    for (a, b) in pairs {
        segment_rows(a, &mut data);
        segment_rows(b, &mut data);
    }
    if data.len() != rows * width {
        return Err(Error::DimMismatch {
            expected: rows * width,
            got: data.len(),
        });
    }
    Array2::from_shape_vec((rows, width), data).map_err(|e| Error::InvalidArgument(e.to_string()))
}

/// `(sum_0, sum_1)` of predicted per-step rewards for each pair.
fn pair_sums(out: &Array2<f64>, pairs: &[(&Segment, &Segment)]) -> Vec<(f64, f64)> {
    let col = out.column(0);
    let mut offset = 0;
    pairs
        .iter()
        .map(|(a, b)| {
            let s0: f64 = col.slice(ndarray::s![offset..offset + a.len()]).sum();
            offset += a.len();
            let s1: f64 = col.slice(ndarray::s![offset..offset + b.len()]).sum();
            offset += b.len();
            (s0, s1)
        })
        .collect()
}

/// `P[seg1 > seg0]` under a single reward network.
pub fn network_preference(net: &Mlp, seg0: &Segment, seg1: &Segment) -> Result<f64> {
    if seg0.len() != seg1.len() {
        return Err(Error::DimMismatch {
            expected: seg0.len(),
            got: seg1.len(),
        });
    }
    let pairs = [(seg0, seg1)];
    let x = pair_matrix(&pairs, net.input_dim())?;
    let out = net.forward(x.view())?;
    let (s0, s1) = pair_sums(&out, &pairs)[0];
    Ok(sigmoid(s1 - s0))
}

/// Soft target used in the loss, after optional smoothing `0.9 y + 0.05`.
pub fn training_target(label: PreferenceLabel, smoothing: bool) -> Result<[f64; 2]> {
    let y = label
        .target()
        .ok_or_else(|| Error::InvalidArgument("skipped queries carry no training target".into()))?;
    Ok(if smoothing {
        [0.9 * y[0] + 0.05, 0.9 * y[1] + 0.05]
    } else {
        y
    })
}

/// Mean cross-entropy over a minibatch and its gradient w.r.t. `net`.
///
/// With `d = sum r(seg1) - sum r(seg0)` the per-record loss is
/// `y0 * softplus(d) + y1 * softplus(-d)` and `dL/dd = sigmoid(d) - y1`.
pub fn preference_loss_and_gradient(
    net: &Mlp,
    batch: &[&PreferenceRecord],
    smoothing: bool,
) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty minibatch".into()));
    }
    let targets = batch
        .iter()
        .map(|r| training_target(r.label, smoothing))
        .collect::<Result<Vec<_>>>()?;
    let pairs: Vec<(&Segment, &Segment)> = batch.iter().map(|r| (&r.seg0, &r.seg1)).collect();
    for (a, b) in &pairs {
        if a.len() != b.len() {
            return Err(Error::DimMismatch {
                expected: a.len(),
                got: b.len(),
            });
        }
    }
    let x = pair_matrix(&pairs, net.input_dim())?;
    let cache = net.forward_cached(x.view())?;
    let sums = pair_sums(cache.output(), &pairs);
    let n = batch.len() as f64;
    let mut loss = 0.0;
    let mut grad_out = Array2::<f64>::zeros((x.nrows(), 1));
    let mut offset = 0;
    for (((s0, s1), y), (a, b)) in sums.iter().zip(&targets).zip(&pairs) {
        let d = s1 - s0;
        loss += y[0] * softplus(d) + y[1] * softplus(-d);
        let gd = (sigmoid(d) - y[1]) / n;
        for i in 0..a.len() {
            grad_out[[offset + i, 0]] = -gd;
        }
        offset += a.len();
        for i in 0..b.len() {
            grad_out[[offset + i, 0]] = gd;
        }
        offset += b.len();
    }
    let (grads, _) = net.backward(&cache, grad_out.view());
    Ok((loss / n, grads))
}

pub fn binary_entropy(p: f64) -> f64 {
    let term = |q: f64| if q > 0.0 { -q * q.ln() } else { 0.0 };
    term(p) + term(1.0 - p)
}

#[derive(Clone, Debug)]
struct Member {
    net: Mlp,
    opt: Adam,
    rng: Rng,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemberStats {
    pub first_epoch_loss: f64,
    pub final_loss: f64,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    pub members: Vec<MemberStats>,
}

impl TrainStats {
    pub fn mean_loss(&self) -> f64 {
        self.members.iter().map(|m| m.final_loss).sum::<f64>() / self.members.len() as f64
    }

    pub fn mean_accuracy(&self) -> f64 {
        self.members.iter().map(|m| m.accuracy).sum::<f64>() / self.members.len() as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleCheckpoint {
    pub format: String,
    pub members: Vec<MlpCheckpoint>,
}

pub const ENSEMBLE_FORMAT: &str = "prefrl-reward-ensemble/1";

#[derive(Clone, Debug)]
pub struct RewardEnsemble {
    members: Vec<Member>,
    config: RewardModelConfig,
    input_dim: usize,
    seed: u64,
    generation: u64,
}

impl RewardEnsemble {
    pub fn new(state_dim: usize, action_dim: usize, config: RewardModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let input_dim = state_dim + action_dim;
        let mut ens = RewardEnsemble {
            members: Vec::new(),
            config,
            input_dim,
            seed,
            generation: 0,
        };
        ens.reinitialize();
        Ok(ens)
    }

    /// Fresh independent initialisation of every member. Each call draws from
    /// new per-member streams so cold restarts differ from the first init.
    pub fn reinitialize(&mut self) {
        let mut sizes = vec![self.input_dim];
        sizes.extend(&self.config.hidden);
        sizes.push(1);
        self.members = (0..self.config.ensemble_size)
            .map(|i| {
                let tag = format!("reward_member_{i}_gen_{}", self.generation);
                let mut init_rng = rng::stream(self.seed, &format!("{tag}_init"));
                let net = Mlp::new(&sizes, Activation::LeakyRelu, Activation::Tanh, &mut init_rng);
                let opt = Adam::new(&net, self.config.lr);
                Member {
                    net,
                    opt,
                    rng: rng::stream(self.seed, &format!("{tag}_shuffle")),
                }
            })
            .collect();
        self.generation += 1;
    }

    /// Build an ensemble from explicit networks (used by tests and checkpoints).
    pub fn from_networks(nets: Vec<Mlp>, config: RewardModelConfig, seed: u64) -> Result<Self> {
        if nets.is_empty() {
            return Err(Error::InvalidArgument("ensemble needs at least one member".into()));
        }
        let input_dim = nets[0].input_dim();
        let sizes = nets[0].sizes();
        if nets.iter().any(|n| n.sizes() != sizes) {
            return Err(Error::InvalidArgument("ensemble members must share an architecture".into()));
        }
        let members = nets
            .into_iter()
            .enumerate()
            .map(|(i, net)| Member {
                opt: Adam::new(&net, config.lr),
                net,
                rng: rng::stream(seed, &format!("reward_member_{i}_gen_0_shuffle")),
            })
            .collect();
        Ok(RewardEnsemble {
            members,
            config,
            input_dim,
            seed,
            generation: 1,
        })
    }

    pub fn config(&self) -> &RewardModelConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn member(&self, i: usize) -> &Mlp {
        &self.members[i].net
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn check_member(&self, i: usize) -> Result<()> {
        if i >= self.members.len() {
            return Err(Error::InvalidArgument(format!(
                "member {i} out of range for ensemble of {}",
                self.members.len()
            )));
        }
        Ok(())
    }

    /// Reward of one member, or the ensemble mean when `member` is `None`.
    pub fn predict_reward(&self, member: Option<usize>, state: &[f64], action: &[f64]) -> Result<f64> {
        let x = reward_input(state, action);
        if x.len() != self.input_dim {
            return Err(Error::DimMismatch {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        let view = ArrayView2::from_shape((1, x.len()), &x).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(self.predict_rows(member, view)?[0])
    }

    /// Rewards for a batch of `[state | action]` rows.
    pub fn predict_rows(&self, member: Option<usize>, rows: ArrayView2<f64>) -> Result<Array1<f64>> {
        match member {
            Some(i) => {
                self.check_member(i)?;
                Ok(self.members[i].net.forward(rows)?.column(0).to_owned())
            }
            None => {
                let mut acc = Array1::<f64>::zeros(rows.nrows());
                for m in &self.members {
                    acc += &m.net.forward(rows)?.column(0);
                }
                Ok(acc / self.members.len() as f64)
            }
        }
    }

    /// The reward the agent trains on, per the configured readout.
    pub fn agent_rewards(&self, rows: ArrayView2<f64>) -> Result<Array1<f64>> {
        match self.config.readout {
            RewardReadout::Mean => self.predict_rows(None, rows),
            RewardReadout::First => self.predict_rows(Some(0), rows),
        }
    }

    pub fn predict_preference(&self, member: usize, seg0: &Segment, seg1: &Segment) -> Result<f64> {
        self.check_member(member)?;
        network_preference(&self.members[member].net, seg0, seg1)
    }

    pub fn member_preferences(&self, seg0: &Segment, seg1: &Segment) -> Result<Vec<f64>> {
        (0..self.members.len()).map(|i| self.predict_preference(i, seg0, seg1)).collect()
    }

    /// Population variance of the members' `P[seg1 > seg0]`.
    pub fn disagreement(&self, seg0: &Segment, seg1: &Segment) -> Result<f64> {
        if self.members.len() < 2 {
            return Err(Error::Insufficient("disagreement needs at least two members".into()));
        }
        Ok(population_variance(&self.member_preferences(seg0, seg1)?))
    }

    /// Binary entropy of one member's preference prediction.
    pub fn predictor_entropy(&self, member: usize, seg0: &Segment, seg1: &Segment) -> Result<f64> {
        Ok(binary_entropy(self.predict_preference(member, seg0, seg1)?))
    }

    /// Entropy averaged over members; the score used by entropy sampling.
    pub fn mean_entropy(&self, seg0: &Segment, seg1: &Segment) -> Result<f64> {
        let p = self.member_preferences(seg0, seg1)?;
        Ok(p.iter().map(|&q| binary_entropy(q)).sum::<f64>() / p.len() as f64)
    }

    pub fn loss_and_gradient(&self, member: usize, batch: &[&PreferenceRecord]) -> Result<(f64, Gradients)> {
        self.check_member(member)?;
        preference_loss_and_gradient(&self.members[member].net, batch, self.config.label_smoothing)
    }

    /// Train every member on its own shuffles of the store. Members are
    /// independent, so running them in parallel cannot change the result.
    pub fn train(&mut self, store: &AnnotationStore, epochs: usize, batch_size: usize) -> Result<TrainStats> {
        if store.is_empty() {
            return Err(Error::Insufficient("annotation store is empty".into()));
        }
        if batch_size == 0 || epochs == 0 {
            return Err(Error::InvalidArgument("epochs and batch_size must be positive".into()));
        }
        if self.config.cold_start {
            self.reinitialize();
        }
        let records = store.records();
        let smoothing = self.config.label_smoothing;
        let stats = self
            .members
            .par_iter_mut()
            .map(|m| train_member(m, records, epochs, batch_size, smoothing))
            .collect::<Result<Vec<_>>>()?;
        Ok(TrainStats { members: stats })
    }

    pub fn to_checkpoint(&self) -> EnsembleCheckpoint {
        EnsembleCheckpoint {
            format: ENSEMBLE_FORMAT.into(),
            members: self.members.iter().map(|m| m.net.to_checkpoint()).collect(),
        }
    }

    pub fn from_checkpoint(ck: &EnsembleCheckpoint, config: RewardModelConfig, seed: u64) -> Result<Self> {
        if ck.format != ENSEMBLE_FORMAT {
            return Err(Error::InvalidArgument(format!("unsupported ensemble format `{}`", ck.format)));
        }
        let nets = ck.members.iter().map(Mlp::from_checkpoint).collect::<Result<Vec<_>>>()?;
        Self::from_networks(nets, config, seed)
    }
}

fn train_member(
    member: &mut Member,
    records: &[PreferenceRecord],
    epochs: usize,
    batch_size: usize,
    smoothing: bool,
) -> Result<MemberStats> {
    let mut order: Vec<usize> = (0..records.len()).collect();
    let mut first_epoch_loss = f64::NAN;
    let mut last_epoch_loss = f64::NAN;
    for epoch in 0..epochs {
        order.shuffle(&mut member.rng);
        let mut total = 0.0;
        for chunk in order.chunks(batch_size) {
            let batch: Vec<&PreferenceRecord> = chunk.iter().map(|&i| &records[i]).collect();
            let (loss, grads) = preference_loss_and_gradient(&member.net, &batch, smoothing)?;
            member.opt.step(&mut member.net, &grads);
            total += loss * chunk.len() as f64;
        }
        let mean = total / records.len() as f64;
        if epoch == 0 {
            first_epoch_loss = mean;
        }
        last_epoch_loss = mean;
    }
    Ok(MemberStats {
        first_epoch_loss,
        final_loss: last_epoch_loss,
        accuracy: preference_accuracy(&member.net, records)?,
    })
}

/// Fraction of forced-choice records whose preferred side the network ranks
/// higher. Equal-labelled records carry no side and are not counted.
pub fn preference_accuracy(net: &Mlp, records: &[PreferenceRecord]) -> Result<f64> {
    let mut hits = 0usize;
    let mut total = 0usize;
    for r in records {
        let want_second = match r.label {
            PreferenceLabel::FirstPreferred => false,
            PreferenceLabel::SecondPreferred => true,
            _ => continue,
        };
        let p = network_preference(net, &r.seg0, &r.seg1)?;
        total += 1;
        if (p > 0.5) == want_second {
            hits += 1;
        }
    }
    Ok(if total == 0 { 1.0 } else { hits as f64 / total as f64 })
}

pub fn population_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}
