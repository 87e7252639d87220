//! Query selection: which segment pairs to show the teacher.
//!
//! Candidate pairs are drawn uniformly from the segment buffer; the
//! uncertainty schemes keep the highest-scoring candidates, the coverage
//! scheme runs greedy k-center over concatenated pair states, and the hybrid
//! schemes do uncertainty first and coverage second.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envsim::Segment;
use crate::error::{Error, Result};
use crate::reward_model::RewardEnsemble;
use crate::rng::{self, Rng};
use crate::teacher::PreferenceLabel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Uniform,
    Disagreement,
    Entropy,
    Coverage,
    DisagreementCoverage,
    EntropyCoverage,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::Uniform,
        Scheme::Disagreement,
        Scheme::Entropy,
        Scheme::Coverage,
        Scheme::DisagreementCoverage,
        Scheme::EntropyCoverage,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Uniform => "uniform",
            Scheme::Disagreement => "disagreement",
            Scheme::Entropy => "entropy",
            Scheme::Coverage => "coverage",
            Scheme::DisagreementCoverage => "disagreement_coverage",
            Scheme::EntropyCoverage => "entropy_coverage",
        }
    }

    fn uncertainty(self) -> Option<Uncertainty> {
        match self {
            Scheme::Disagreement | Scheme::DisagreementCoverage => Some(Uncertainty::Disagreement),
            Scheme::Entropy | Scheme::EntropyCoverage => Some(Uncertainty::Entropy),
            _ => None,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.name() == s || k.name().replace('_', "+") == s)
            .ok_or_else(|| Error::Unknown {
                kind: "sampling scheme",
                name: s.to_string(),
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Uncertainty {
    Disagreement,
    Entropy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub scheme: Scheme,
    /// Candidate pool size as a multiple of the session's query count.
    pub init_factor: usize,
    /// Hybrid intermediate size as a multiple of the session's query count.
    pub inter_factor: usize,
    pub rng_seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            scheme: Scheme::Disagreement,
            init_factor: 10,
            inter_factor: 5,
            rng_seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.init_factor == 0 || self.inter_factor == 0 {
            return Err(Error::Config("sampler factors must be >= 1".into()));
        }
        if self.inter_factor > self.init_factor {
            return Err(Error::Config(format!(
                "inter_factor ({}) must not exceed init_factor ({})",
                self.inter_factor, self.init_factor
            )));
        }
        Ok(())
    }
}

pub type PairIndex = (usize, usize);

/// `n` pairs of distinct segment indices drawn uniformly from the buffer.
pub fn sample_uniform(buffer: &[Segment], n: usize, rng: &mut Rng) -> Result<Vec<PairIndex>> {
    sample_uniform_indices(buffer.len(), n, rng)
}

pub fn sample_uniform_indices(len: usize, n: usize, rng: &mut Rng) -> Result<Vec<PairIndex>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    if len < 2 {
        return Err(Error::Insufficient(format!("need at least 2 segments to form a pair, have {len}")));
    }
    Ok((0..n)
        .map(|_| {
            let i = rng.random_range(0..len);
            // uniform over the other len-1 indices
            let mut j = rng.random_range(0..len - 1);
            if j >= i {
                j += 1;
            }
            (i, j)
        })
        .collect())
}

/// Indices of the `n` largest scores, highest first; ties go to the lower
/// index.
pub fn select_by_score(scores: &[f64], n: usize) -> Result<Vec<usize>> {
    if n > scores.len() {
        return Err(Error::Insufficient(format!("cannot select {n} of {} candidates", scores.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("uncertainty score"));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(n);
    Ok(idx)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Greedy farthest-first k-center. The first center is index 0; every later
/// center is the point farthest from its nearest chosen center (lowest index
/// on ties).
pub fn kcenter_select(features: &[Vec<f64>], n: usize) -> Result<Vec<usize>> {
    if features.is_empty() {
        return Err(Error::Insufficient("empty pool".into()));
    }
    if n > features.len() {
        return Err(Error::Insufficient(format!("cannot select {n} of {} candidates", features.len())));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut centers = Vec::with_capacity(n);
    let mut nearest = vec![f64::INFINITY; features.len()];
    let mut next = 0;
    while centers.len() < n {
        centers.push(next);
        let c = &features[next];
        for (j, f) in features.iter().enumerate() {
            let d = sq_dist(c, f);
            if d < nearest[j] {
                nearest[j] = d;
            }
        }
        let mut best = f64::NEG_INFINITY;
        for (j, &d) in nearest.iter().enumerate() {
            if d > best {
                best = d;
                next = j;
            }
        }
    }
    Ok(centers)
}

/// Largest distance from any point to its nearest center.
pub fn covering_radius(features: &[Vec<f64>], centers: &[usize]) -> f64 {
    features
        .iter()
        .map(|f| {
            centers
                .iter()
                .map(|&c| sq_dist(f, &features[c]))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
        .sqrt()
}

/// Top `n_inter` by score (kept in pool order), then k-center down to
/// `n_query`. Returned indices refer to the original pool.
pub fn hybrid_select(scores: &[f64], features: &[Vec<f64>], n_inter: usize, n_query: usize) -> Result<Vec<usize>> {
    if scores.len() != features.len() {
        return Err(Error::DimMismatch {
            expected: scores.len(),
            got: features.len(),
        });
    }
    if n_query > n_inter || n_inter > scores.len() {
        return Err(Error::InvalidArgument(format!(
            "hybrid selection needs n_query <= n_inter <= pool ({n_query} <= {n_inter} <= {})",
            scores.len()
        )));
    }
    let mut inter = select_by_score(scores, n_inter)?;
    inter.sort_unstable();
    let sub: Vec<Vec<f64>> = inter.iter().map(|&i| features[i].clone()).collect();
    Ok(kcenter_select(&sub, n_query)?.into_iter().map(|k| inter[k]).collect())
}

/// Coverage feature of a pair: states of seg0 then states of seg1.
pub fn pair_features(buffer: &[Segment], pair: PairIndex) -> Vec<f64> {
    let mut f = buffer[pair.0].concat_states();
    f.extend(buffer[pair.1].concat_states());
    f
}

/// Fraction of non-skipped labels that are `Equal`.
pub fn equal_label_fraction(labels: &[PreferenceLabel]) -> f64 {
    let answered = labels.iter().filter(|l| **l != PreferenceLabel::Skipped).count();
    if answered == 0 {
        return 0.0;
    }
    labels.iter().filter(|l| **l == PreferenceLabel::Equal).count() as f64 / answered as f64
}

pub fn uncertainty_scores(
    buffer: &[Segment],
    pool: &[PairIndex],
    ensemble: &RewardEnsemble,
    kind: Uncertainty,
) -> Result<Vec<f64>> {
    pool.par_iter()
        .map(|&(i, j)| match kind {
            Uncertainty::Disagreement => ensemble.disagreement(&buffer[i], &buffer[j]),
            Uncertainty::Entropy => ensemble.mean_entropy(&buffer[i], &buffer[j]),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub pairs: Vec<PairIndex>,
    /// Mean ensemble disagreement over the selected pairs (`None` for a
    /// single-member ensemble or an empty selection).
    pub mean_disagreement: Option<f64>,
    /// Selected pairs that repeat an earlier pair of the same session.
    pub duplicates: usize,
}

/// Stateful sampler owning its random stream.
#[derive(Clone, Debug)]
pub struct QuerySampler {
    config: SamplerConfig,
    rng: Rng,
}

impl QuerySampler {
    pub fn new(config: SamplerConfig) -> Result<Self> {
        config.validate()?;
        let rng = rng::from_seed(config.rng_seed);
        Ok(QuerySampler { config, rng })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    pub fn select(&mut self, buffer: &[Segment], ensemble: &RewardEnsemble, n_query: usize) -> Result<Selection> {
        let scheme = self.config.scheme;
        let pairs = if n_query == 0 {
            Vec::new()
        } else if scheme == Scheme::Uniform {
            sample_uniform(buffer, n_query, &mut self.rng)?
        } else {
            let n_init = n_query * self.config.init_factor;
            let pool = sample_uniform(buffer, n_init, &mut self.rng)?;
            let picks = match (scheme, scheme.uncertainty()) {
                (Scheme::Coverage, _) => {
                    let feats: Vec<Vec<f64>> = pool.iter().map(|&p| pair_features(buffer, p)).collect();
                    kcenter_select(&feats, n_query)?
                }
                (Scheme::Disagreement | Scheme::Entropy, Some(kind)) => {
                    let scores = uncertainty_scores(buffer, &pool, ensemble, kind)?;
                    select_by_score(&scores, n_query)?
                }
                (_, Some(kind)) => {
                    let scores = uncertainty_scores(buffer, &pool, ensemble, kind)?;
                    let feats: Vec<Vec<f64>> = pool.iter().map(|&p| pair_features(buffer, p)).collect();
                    let n_inter = (n_query * self.config.inter_factor).min(pool.len());
                    hybrid_select(&scores, &feats, n_inter, n_query)?
                }
                _ => unreachable!("every non-uniform scheme is handled"),
            };
            picks.into_iter().map(|k| pool[k]).collect()
        };
        let mut seen = HashSet::new();
        let duplicates = pairs.iter().filter(|p| !seen.insert(**p)).count();
        let mean_disagreement = if ensemble.len() >= 2 && !pairs.is_empty() {
            let d = uncertainty_scores(buffer, &pairs, ensemble, Uncertainty::Disagreement)?;
            Some(d.iter().sum::<f64>() / d.len() as f64)
        } else {
            None
        };
        Ok(Selection {
            pairs,
            mean_disagreement,
            duplicates,
        })
    }
}
