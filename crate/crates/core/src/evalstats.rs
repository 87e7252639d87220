//! Aggregate metrics over runs, bootstrap intervals and reward alignment.

use std::fs::File;
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::envsim::{Metric, SegmentStep};
use crate::error::{Error, Result};
use crate::reward_model::RewardEnsemble;
use crate::rng;

pub fn mean(xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::Insufficient("mean of an empty set".into()));
    }
    Ok(xs.iter().sum::<f64>() / xs.len() as f64)
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub fn median(xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::Insufficient("median of an empty set".into()));
    }
    let v = sorted(xs);
    let n = v.len();
    Ok(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Interquartile mean: drops `floor(n/4)` scores from each end.
pub fn iqm(xs: &[f64]) -> Result<f64> {
    if xs.len() < 4 {
        return Err(Error::Insufficient(format!(
            "IQM needs at least 4 scores, got {}",
            xs.len()
        )));
    }
    let v = sorted(xs);
    let cut = v.len() / 4;
    mean(&v[cut..v.len() - cut])
}

pub fn optimality_gap(xs: &[f64], target: f64) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::Insufficient("optimality gap of an empty set".into()));
    }
    Ok(xs.iter().map(|&x| (target - x).max(0.0)).sum::<f64>() / xs.len() as f64)
}

/// Mean preference-learning score over mean ground-truth-reward score.
pub fn normalized_return(pref: &[f64], gt: &[f64]) -> Result<f64> {
    let base = baseline(gt)?;
    Ok(mean(pref)? / base)
}

/// Per-run scores divided by the ground-truth baseline mean.
pub fn normalize_scores(pref: &[f64], gt: &[f64]) -> Result<Vec<f64>> {
    let base = baseline(gt)?;
    Ok(pref.iter().map(|x| x / base).collect())
}

fn baseline(gt: &[f64]) -> Result<f64> {
    let base = mean(gt)?;
    if !(base > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "ground-truth baseline mean must be positive to normalize, got {base} over {} runs",
            gt.len()
        )));
    }
    Ok(base)
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(v: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregate {
    Mean,
    Median,
    Iqm,
    OptimalityGap,
}

impl Aggregate {
    pub const ALL: [Aggregate; 4] = [
        Aggregate::Mean,
        Aggregate::Median,
        Aggregate::Iqm,
        Aggregate::OptimalityGap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Aggregate::Mean => "mean",
            Aggregate::Median => "median",
            Aggregate::Iqm => "iqm",
            Aggregate::OptimalityGap => "optimality_gap",
        }
    }

    pub fn compute(self, xs: &[f64]) -> Result<f64> {
        match self {
            Aggregate::Mean => mean(xs),
            Aggregate::Median => median(xs),
            Aggregate::Iqm => iqm(xs),
            Aggregate::OptimalityGap => optimality_gap(xs, 1.0),
        }
    }
}

/// Stratified percentile bootstrap.
///
/// Each stratum is resampled with replacement at its own size, the strata are
/// pooled, and `metric` is evaluated on the pool. Returns the `(1 - level)/2`
/// and `(1 + level)/2` quantiles of the resampled statistic.
pub fn bootstrap_ci<F>(
    strata: &[Vec<f64>],
    metric: F,
    resamples: usize,
    level: f64,
    seed: u64,
) -> Result<(f64, f64)>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if resamples < 1000 {
        return Err(Error::InvalidArgument(format!(
            "bootstrap needs at least 1000 resamples, got {resamples}"
        )));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("confidence level {level} not in (0, 1)")));
    }
    if strata.is_empty() || strata.iter().any(Vec::is_empty) {
        return Err(Error::Insufficient("bootstrap needs non-empty strata".into()));
    }
    let mut rng = rng::stream(seed, "bootstrap");
    let total: usize = strata.iter().map(Vec::len).sum();
    let mut pool = Vec::with_capacity(total);
    let mut stats = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        pool.clear();
        for s in strata {
            for _ in 0..s.len() {
                pool.push(s[rng.random_range(0..s.len())]);
            }
        }
        stats.push(metric(&pool)?);
    }
    stats.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    Ok((quantile_sorted(&stats, alpha), quantile_sorted(&stats, 1.0 - alpha)))
}

fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some(sab / (saa * sbb).sqrt())
}

/// Spearman rank correlation with average ranks for ties; `None` when either
/// series is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() {
        return None;
    }
    pearson(&average_ranks(a), &average_ranks(b))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Alignment {
    pub spearman: Option<f64>,
    pub learned: Vec<f64>,
    pub truth: Vec<f64>,
}

/// Learned (ensemble-mean) versus ground-truth per-step rewards along a rollout.
pub fn reward_alignment(rollout: &[SegmentStep], ensemble: &RewardEnsemble) -> Result<Alignment> {
    if rollout.is_empty() {
        return Err(Error::Insufficient("alignment needs a non-empty rollout".into()));
    }
    let mut learned = Vec::with_capacity(rollout.len());
    for step in rollout {
        learned.push(ensemble.predict_reward(None, &step.state, &step.action)?);
    }
    let truth: Vec<f64> = rollout.iter().map(|s| s.reward_true).collect();
    Ok(Alignment {
        spearman: spearman(&learned, &truth),
        learned,
        truth,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub step: u64,
    pub true_return: f64,
    pub success: Option<f64>,
    pub queries_used: usize,
    pub reward_loss: Option<f64>,
    pub ensemble_disagreement: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub seed: u64,
    pub teacher: String,
    pub algo: String,
    pub env: String,
    pub budget: usize,
    pub metric: Metric,
    pub curve: Vec<CurveRow>,
    pub final_returns: Vec<f64>,
    #[serde(default)]
    pub final_successes: Vec<f64>,
}

impl RunRecord {
    /// Final evaluation score: mean return, or success rate for success-metric tasks.
    pub fn score(&self) -> Result<f64> {
        match self.metric {
            Metric::Return => mean(&self.final_returns),
            Metric::SuccessRate => mean(&self.final_successes),
        }
    }

    pub fn check_invariants(&self) -> Result<()> {
        for w in self.curve.windows(2) {
            if w[1].step <= w[0].step {
                return Err(Error::InvalidArgument("curve steps not strictly increasing".into()));
            }
            if w[1].queries_used < w[0].queries_used {
                return Err(Error::InvalidArgument("queries_used decreased".into()));
            }
        }
        if self.curve.iter().any(|r| r.queries_used > self.budget) {
            return Err(Error::InvalidArgument("queries_used exceeds budget".into()));
        }
        Ok(())
    }
}

pub const CURVE_HEADER: [&str; 6] = [
    "step",
    "true_return",
    "success",
    "queries_used",
    "reward_loss",
    "ensemble_disagreement",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_curve_csv(path: &Path, rows: &[CurveRow]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(CURVE_HEADER)?;
    for r in rows {
        w.write_record([
            r.step.to_string(),
            r.true_return.to_string(),
            opt(r.success),
            r.queries_used.to_string(),
            opt(r.reward_loss),
            opt(r.ensemble_disagreement),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_curve_csv(path: &Path) -> Result<Vec<CurveRow>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let header = r.headers()?.clone();
    if header.iter().ne(CURVE_HEADER) {
        return Err(Error::InvalidArgument(format!(
            "{} has an unexpected curve header",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for rec in r.deserialize() {
        rows.push(rec?);
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: Aggregate,
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub env: String,
    pub teacher: String,
    pub algo: String,
    pub budget: usize,
    pub runs: usize,
    /// Normalized per-run scores.
    pub scores: Vec<f64>,
    pub metrics: Vec<MetricSummary>,
}

impl Cell {
    pub fn get(&self, metric: Aggregate) -> Option<&MetricSummary> {
        self.metrics.iter().find(|m| m.metric == metric)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub cells: Vec<Cell>,
}

#[derive(Clone, Copy, Debug)]
pub struct BootstrapSettings {
    pub resamples: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for BootstrapSettings {
    fn default() -> Self {
        Self {
            resamples: 2000,
            level: 0.95,
            seed: 0,
        }
    }
}

/// Summarizes one cell of normalized scores. IQM needs four runs; with fewer
/// it falls back to the mean so small sweeps still report.
pub fn summarize_cell(scores: &[f64], boot: BootstrapSettings) -> Result<Vec<MetricSummary>> {
    let strata = vec![scores.to_vec()];
    let mut out = Vec::new();
    for metric in Aggregate::ALL {
        let f = |xs: &[f64]| match metric {
            Aggregate::Iqm if xs.len() < 4 => mean(xs),
            m => m.compute(xs),
        };
        let point = f(scores)?;
        let (lo, hi) = bootstrap_ci(&strata, f, boot.resamples, boot.level, boot.seed)?;
        out.push(MetricSummary {
            metric,
            point,
            lo: lo.min(point),
            hi: hi.max(point),
        });
    }
    Ok(out)
}

impl AggregateReport {
    pub fn find(&self, env: &str, teacher: &str, algo: &str, budget: usize) -> Option<&Cell> {
        self.cells
            .iter()
            .find(|c| c.env == env && c.teacher == teacher && c.algo == algo && c.budget == budget)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// One row per cell and metric.
    pub fn write_plot_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(["env", "teacher", "algo", "budget", "metric", "point", "lo", "hi"])?;
        for c in &self.cells {
            for m in &c.metrics {
                w.write_record([
                    c.env.clone(),
                    c.teacher.clone(),
                    c.algo.clone(),
                    c.budget.to_string(),
                    m.metric.name().to_string(),
                    m.point.to_string(),
                    m.lo.to_string(),
                    m.hi.to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}
