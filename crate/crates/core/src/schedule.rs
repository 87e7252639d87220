//! Splitting a fixed query budget across feedback sessions.
//!
//! Sessions start every `session_period` agent steps, at `t = 0, K, 2K, …`
//! while `t < horizon`. Decay weights follow `(T / (t + T))^p` and increase
//! weights `((T + t) / T)^p`. Unless an exponent is given, `p` is solved so
//! that the first session receives 2× (decay) or 0.5× (increase) the uniform
//! share. Integer counts come from largest-remainder rounding, ties to the
//! earlier session, so the total is always exact.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    #[default]
    Uniform,
    Decay,
    Increase,
}

impl ScheduleKind {
    pub fn name(self) -> &'static str {
        match self {
            ScheduleKind::Uniform => "uniform",
            ScheduleKind::Decay => "decay",
            ScheduleKind::Increase => "increase",
        }
    }

    /// First-session share relative to uniform.
    pub fn first_session_factor(self) -> f64 {
        match self {
            ScheduleKind::Uniform => 1.0,
            ScheduleKind::Decay => 2.0,
            ScheduleKind::Increase => 0.5,
        }
    }
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(ScheduleKind::Uniform),
            "decay" => Ok(ScheduleKind::Decay),
            "increase" => Ok(ScheduleKind::Increase),
            other => Err(Error::Unknown {
                kind: "schedule",
                name: other.to_string(),
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub kind: ScheduleKind,
    pub total_budget: usize,
    /// Agent steps between feedback sessions (`K`).
    pub session_period: usize,
    /// Episode length `T`.
    pub episode_len: usize,
    /// Total agent steps covered by the schedule.
    pub horizon: usize,
    /// Proportionality exponent; `None` calibrates it to the first-session factor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
}

impl ScheduleConfig {
    pub fn session_starts(&self) -> Vec<usize> {
        if self.session_period == 0 {
            return Vec::new();
        }
        (0..self.horizon).step_by(self.session_period).collect()
    }

    pub fn sessions(&self) -> usize {
        if self.session_period == 0 {
            0
        } else {
            self.horizon.div_ceil(self.session_period)
        }
    }
}

fn weights(kind: ScheduleKind, starts: &[usize], episode_len: f64, p: f64) -> Vec<f64> {
    starts
        .iter()
        .map(|&t| {
            let t = t as f64;
            match kind {
                ScheduleKind::Uniform => 1.0,
                ScheduleKind::Decay => (episode_len / (t + episode_len)).powf(p),
                ScheduleKind::Increase => ((episode_len + t) / episode_len).powf(p),
            }
        })
        .collect()
}

const MAX_EXPONENT: f64 = 64.0;

/// Exponent at which the first weight is `factor` times the mean weight.
fn calibrate_exponent(kind: ScheduleKind, starts: &[usize], episode_len: f64) -> f64 {
    let n = starts.len() as f64;
    let target = kind.first_session_factor();
    // w_0 = 1, so the ratio is n / sum(w); it rises with p for decay and
    // falls with p for increase.
    let ratio = |p: f64| n / weights(kind, starts, episode_len, p).iter().sum::<f64>();
    let too_low = |p: f64| match kind {
        ScheduleKind::Decay => ratio(p) < target,
        _ => ratio(p) > target,
    };
    if too_low(MAX_EXPONENT) {
        return MAX_EXPONENT;
    }
    let (mut lo, mut hi) = (0.0, MAX_EXPONENT);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if too_low(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Integer apportionment of `total` proportional to `weights`.
pub fn largest_remainder(weights: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Per-session query counts.
pub fn plan(config: &ScheduleConfig) -> Result<Vec<usize>> {
    if config.session_period == 0 || config.horizon == 0 || config.episode_len == 0 {
        return Err(Error::Config(
            "schedule needs positive session_period, horizon and episode_len".into(),
        ));
    }
    let starts = config.session_starts();
    if config.total_budget < starts.len() {
        return Err(Error::Config(format!(
            "budget {} is smaller than the {} feedback sessions",
            config.total_budget,
            starts.len()
        )));
    }
    let t = config.episode_len as f64;
    let p = match (config.kind, config.exponent) {
        (ScheduleKind::Uniform, _) => 0.0,
        (_, Some(p)) => p,
        (kind, None) if starts.len() > 1 => calibrate_exponent(kind, &starts, t),
        _ => 0.0,
    };
    let w = weights(config.kind, &starts, t, p);
    Ok(largest_remainder(&w, config.total_budget))
}
