//! Simulated teachers that answer pairwise segment queries.
//!
//! A teacher compares two segments by their ground-truth rewards and may
//! skip the query, declare the pair equally preferable, answer stochastically
//! under a Bradley-Terry model with myopic discounting, or flip its answer by
//! mistake. The branch order is fixed: skip, then equal, then sample, then
//! flip.

use std::fmt;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::envsim::Segment;
use crate::error::{Error, Result};
use crate::nn::sigmoid;
use crate::rng::{self, Rng};

/// Rationality constant of the preference model. `Infinite` is the
/// deterministic limit and never goes through the exponential.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BetaRepr", into = "BetaRepr")]
pub enum Beta {
    Finite(f64),
    Infinite,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum BetaRepr {
    Num(f64),
    Text(String),
}

impl TryFrom<BetaRepr> for Beta {
    type Error = String;

    fn try_from(r: BetaRepr) -> std::result::Result<Self, String> {
        match r {
            BetaRepr::Num(v) if v.is_infinite() && v > 0.0 => Ok(Beta::Infinite),
            BetaRepr::Num(v) if v >= 0.0 => Ok(Beta::Finite(v)),
            BetaRepr::Num(v) => Err(format!("beta must be non-negative, got {v}")),
            BetaRepr::Text(s) => s.parse(),
        }
    }
}

impl From<Beta> for BetaRepr {
    fn from(b: Beta) -> Self {
        match b {
            Beta::Finite(v) => BetaRepr::Num(v),
            Beta::Infinite => BetaRepr::Text("inf".into()),
        }
    }
}

impl std::str::FromStr for Beta {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "+inf" => Ok(Beta::Infinite),
            other => match other.parse::<f64>() {
                Ok(v) if v.is_infinite() && v > 0.0 => Ok(Beta::Infinite),
                Ok(v) if v >= 0.0 => Ok(Beta::Finite(v)),
                _ => Err(format!("invalid beta `{s}`")),
            },
        }
    }
}

impl fmt::Display for Beta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Beta::Finite(v) => write!(f, "{v}"),
            Beta::Infinite => write!(f, "inf"),
        }
    }
}

/// Which threshold, if any, is rescaled from the current policy's return.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Adaptive {
    #[default]
    Off,
    Skip,
    Equal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TeacherConfig {
    pub beta: Beta,
    pub gamma: f64,
    pub epsilon_mistake: f64,
    pub delta_skip: f64,
    pub delta_equal: f64,
    #[serde(default)]
    pub adaptive: Adaptive,
    #[serde(default)]
    pub epsilon_adapt: f64,
    #[serde(default)]
    pub rng_seed: u64,
}

impl Default for TeacherConfig {
    fn default() -> Self {
        TeacherConfig {
            beta: Beta::Infinite,
            gamma: 1.0,
            epsilon_mistake: 0.0,
            delta_skip: 0.0,
            delta_equal: 0.0,
            adaptive: Adaptive::Off,
            epsilon_adapt: 0.0,
            rng_seed: 0,
        }
    }
}

pub const PRESET_NAMES: [&str; 6] = ["oracle", "stoc", "mistake", "skip", "equal", "myopic"];

/// The six named teachers, each one irrationality away from the oracle.
pub fn preset(name: &str) -> Result<TeacherConfig> {
    let oracle = TeacherConfig::default();
    let cfg = match name {
        "oracle" => oracle,
        "stoc" => TeacherConfig {
            beta: Beta::Finite(1.0),
            ..oracle
        },
        "mistake" => TeacherConfig {
            epsilon_mistake: 0.1,
            ..oracle
        },
        "skip" => TeacherConfig {
            adaptive: Adaptive::Skip,
            epsilon_adapt: 0.1,
            ..oracle
        },
        "equal" => TeacherConfig {
            adaptive: Adaptive::Equal,
            epsilon_adapt: 0.1,
            ..oracle
        },
        "myopic" => TeacherConfig {
            gamma: 0.9,
            ..oracle
        },
        other => {
            return Err(Error::Unknown {
                kind: "teacher preset",
                name: other.to_string(),
            })
        }
    };
    Ok(cfg)
}

impl TeacherConfig {
    pub fn validate(&self) -> Result<()> {
        if let Beta::Finite(b) = self.beta {
            if !(b >= 0.0) || !b.is_finite() {
                return Err(Error::Config(format!("beta must be >= 0, got {b}")));
            }
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!("gamma must be in (0, 1], got {}", self.gamma)));
        }
        if !(0.0..1.0).contains(&self.epsilon_mistake) {
            return Err(Error::Config(format!(
                "epsilon_mistake must be in [0, 1), got {}",
                self.epsilon_mistake
            )));
        }
        if !(self.delta_skip >= 0.0) || !(self.delta_equal >= 0.0) {
            return Err(Error::Config("thresholds must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.epsilon_adapt) {
            return Err(Error::Config(format!(
                "epsilon_adapt must be in [0, 1], got {}",
                self.epsilon_adapt
            )));
        }
        Ok(())
    }

    /// Effective `(delta_skip, delta_equal)` given the policy's recent return.
    pub fn thresholds(&self, ctx: &ThresholdContext) -> (f64, f64) {
        let adapt = || adaptive_threshold(ctx.avg_return, ctx.segment_len, ctx.episode_len, self.epsilon_adapt);
        match self.adaptive {
            Adaptive::Off => (self.delta_skip, self.delta_equal),
            Adaptive::Skip => (adapt(), self.delta_equal),
            Adaptive::Equal => (self.delta_skip, adapt()),
        }
    }
}

/// Inputs to the adaptive threshold at query time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThresholdContext {
    /// Average episodic ground-truth return of the current policy.
    pub avg_return: f64,
    pub segment_len: usize,
    pub episode_len: usize,
}

impl ThresholdContext {
    pub fn fixed() -> Self {
        ThresholdContext {
            avg_return: 0.0,
            segment_len: 1,
            episode_len: 1,
        }
    }
}

/// `(H / T) * avg_return * epsilon_adapt`: the policy's per-segment return
/// scale times the tolerance.
pub fn adaptive_threshold(avg_return: f64, segment_len: usize, episode_len: usize, epsilon_adapt: f64) -> f64 {
    assert!(episode_len > 0, "episode length must be positive");
    (segment_len as f64 / episode_len as f64) * avg_return * epsilon_adapt
}

/// `sum_t gamma^(H - t) r_t`: the last step has weight 1.
pub fn discounted_return(rewards: &[f64], gamma: f64) -> f64 {
    let mut acc = 0.0;
    for &r in rewards {
        acc = acc * gamma + r;
    }
    acc
}

pub fn segment_discounted_return(seg: &Segment, gamma: f64) -> f64 {
    let rewards: Vec<f64> = seg.rewards().collect();
    discounted_return(&rewards, gamma)
}

/// `P[i > j]` from two (discounted) returns.
pub fn preference_probability_from_returns(return_i: f64, return_j: f64, beta: Beta) -> Result<f64> {
    if !return_i.is_finite() || !return_j.is_finite() {
        return Err(Error::NonFinite("segment return"));
    }
    Ok(match beta {
        Beta::Infinite => {
            if return_i > return_j {
                1.0
            } else if return_i < return_j {
                0.0
            } else {
                0.5
            }
        }
        Beta::Finite(b) => {
            // exp(b Ri) / (exp(b Ri) + exp(b Rj)) == logistic(b (Ri - Rj))
            let x = b * (return_i - return_j);
            if x == 0.0 {
                0.5
            } else {
                sigmoid(x)
            }
        }
    })
}

pub fn preference_probability(seg_i: &Segment, seg_j: &Segment, beta: Beta, gamma: f64) -> Result<f64> {
    if seg_i.len() != seg_j.len() {
        return Err(Error::DimMismatch {
            expected: seg_i.len(),
            got: seg_j.len(),
        });
    }
    preference_probability_from_returns(
        segment_discounted_return(seg_i, gamma),
        segment_discounted_return(seg_j, gamma),
        beta,
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreferenceLabel {
    /// `y = (1, 0)`
    FirstPreferred,
    /// `y = (0, 1)`
    SecondPreferred,
    /// `y = (0.5, 0.5)`
    Equal,
    Skipped,
}

impl PreferenceLabel {
    /// Label as a distribution over `(seg0, seg1)`; `None` when skipped.
    pub fn target(self) -> Option<[f64; 2]> {
        match self {
            PreferenceLabel::FirstPreferred => Some([1.0, 0.0]),
            PreferenceLabel::SecondPreferred => Some([0.0, 1.0]),
            PreferenceLabel::Equal => Some([0.5, 0.5]),
            PreferenceLabel::Skipped => None,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            PreferenceLabel::FirstPreferred => PreferenceLabel::SecondPreferred,
            PreferenceLabel::SecondPreferred => PreferenceLabel::FirstPreferred,
            other => other,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreferenceRecord {
    pub seg0: Segment,
    pub seg1: Segment,
    pub label: PreferenceLabel,
    /// Agent step at which the query was asked.
    pub query_step: u64,
}

/// A teacher instance with its own random stream.
#[derive(Clone, Debug)]
pub struct SimTeacher {
    config: TeacherConfig,
    rng: Rng,
    exact_ties: u64,
}

impl SimTeacher {
    pub fn new(config: TeacherConfig) -> Result<Self> {
        config.validate()?;
        let rng = rng::from_seed(config.rng_seed);
        Ok(SimTeacher {
            config,
            rng,
            exact_ties: 0,
        })
    }

    pub fn config(&self) -> &TeacherConfig {
        &self.config
    }

    /// Number of forced-choice queries whose returns tied exactly under the
    /// deterministic rule and were answered `Equal`.
    pub fn exact_ties(&self) -> u64 {
        self.exact_ties
    }

    pub fn label(&mut self, seg0: &Segment, seg1: &Segment, ctx: &ThresholdContext) -> Result<PreferenceLabel> {
        if seg0.len() != seg1.len() {
            return Err(Error::DimMismatch {
                expected: seg0.len(),
                got: seg1.len(),
            });
        }
        let (delta_skip, delta_equal) = self.config.thresholds(ctx);
        let sum0 = seg0.true_return();
        let sum1 = seg1.true_return();
        if !sum0.is_finite() || !sum1.is_finite() {
            return Err(Error::NonFinite("segment return"));
        }
        if sum0.max(sum1) < delta_skip {
            return Ok(PreferenceLabel::Skipped);
        }
        if (sum1 - sum0).abs() < delta_equal {
            return Ok(PreferenceLabel::Equal);
        }
        let gamma = self.config.gamma;
        let p_first = preference_probability(seg0, seg1, self.config.beta, gamma)?;
        let sampled = match self.config.beta {
            Beta::Infinite if p_first == 0.5 => {
                self.exact_ties += 1;
                return Ok(PreferenceLabel::Equal);
            }
            Beta::Infinite => {
                if p_first == 1.0 {
                    PreferenceLabel::FirstPreferred
                } else {
                    PreferenceLabel::SecondPreferred
                }
            }
            Beta::Finite(_) => {
                if self.rng.random::<f64>() < p_first {
                    PreferenceLabel::FirstPreferred
                } else {
                    PreferenceLabel::SecondPreferred
                }
            }
        };
        if self.config.epsilon_mistake > 0.0 && self.rng.random::<f64>() < self.config.epsilon_mistake {
            Ok(sampled.flipped())
        } else {
            Ok(sampled)
        }
    }
}
