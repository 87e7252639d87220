//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Set `ACCEPTANCE_ONLY=1,4,10` to run a subset.

use std::path::Path;
use std::time::{Duration, Instant};

use ndarray::Array2;
use prefrl_core::agents::{intrinsic_reward, train_preference_rl, Algo, TrainConfig};
use prefrl_core::envsim::{Segment, SegmentStep};
use prefrl_core::evalstats::{
    bootstrap_ci, iqm, mean, normalized_return, optimality_gap, reward_alignment, Aggregate, AggregateReport,
};
use prefrl_core::harness::{self, ExperimentConfig, SweepConfig};
use prefrl_core::nn::{Activation, Mlp};
use prefrl_core::reward_model::{
    network_preference, preference_loss_and_gradient, RewardEnsemble, RewardModelConfig,
};
use prefrl_core::rng::{self, Rng};
use prefrl_core::sampler::{covering_radius, kcenter_select, select_by_score, uncertainty_scores, Uncertainty};
use prefrl_core::teacher::{self, preference_probability, Beta, PreferenceLabel, PreferenceRecord, SimTeacher, ThresholdContext};
use prefrl_core::Result;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

const FORMULA_TOL: f64 = 1e-9;
const FORMULA_PAIRS: usize = 1000;
const FORMULA_LIMIT: Duration = Duration::from_secs(1);

const LABELS: usize = 10_000;
const FLIP_BAND: (f64, f64) = (0.09, 0.11);
const WIN_RATE_TOL: f64 = 0.02;
const STATS_LIMIT: Duration = Duration::from_secs(10);

const GRAD_BATCHES: usize = 100;
const GRAD_REL_TOL: f64 = 1e-4;
const GRAD_STEP: f64 = 1e-6;
const GRAD_LIMIT: Duration = Duration::from_secs(30);

const KCENTER_POOLS: usize = 300;
const KCENTER_MAX_POINTS: usize = 8;
const KNN_QUERIES: usize = 1000;
const KNN_TOL: f64 = 1e-12;
const SAMPLER_LIMIT: Duration = Duration::from_secs(60);

const COVERAGE_TRIALS: usize = 500;
const COVERAGE_BAND: (f64, f64) = (0.92, 0.98);
const COVERAGE_RESAMPLES: usize = 1000;
const STATS_ORACLE_LIMIT: Duration = Duration::from_secs(120);

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const NORMALIZED_FLOOR: f64 = 0.8;
const LEARNING_LIMIT: Duration = Duration::from_secs(45 * 60);
const ALIGNMENT_FLOOR: f64 = 0.7;
const ALIGNMENT_STEPS: usize = 500;
const CI_RESAMPLES: usize = 2000;
const CI_LEVEL: f64 = 0.95;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(elapsed: Duration, limit: Duration) -> bool {
    elapsed <= limit
}

fn random_segment(r: &mut Rng, len: usize, dim: usize) -> Segment {
    Segment::new(
        (0..len)
            .map(|_| SegmentStep {
                state: (0..dim).map(|_| r.random_range(-1.0..1.0)).collect(),
                action: (0..dim).map(|_| r.random_range(-1.0..1.0)).collect(),
                reward_true: r.random_range(0.0..1.0),
            })
            .collect(),
    )
}

fn segment_from(rewards: &[f64]) -> Segment {
    Segment::new(
        rewards
            .iter()
            .map(|&r| SegmentStep {
                state: vec![r],
                action: vec![0.0],
                reward_true: r,
            })
            .collect(),
    )
}

/// The Bradley-Terry probability written out term by term.
fn direct_probability(a: &Segment, b: &Segment, beta: f64, gamma: f64) -> f64 {
    let h = a.len() as i32;
    let weighted = |s: &Segment| -> f64 {
        s.steps
            .iter()
            .enumerate()
            .map(|(k, st)| gamma.powi(h - 1 - k as i32) * st.reward_true)
            .sum()
    };
    let ea = (beta * weighted(a)).exp();
    let eb = (beta * weighted(b)).exp();
    ea / (ea + eb)
}

fn criterion_1() -> Result<Outcome> {
    let start = Instant::now();
    let mut r = rng::stream(1, "acceptance");
    let mut worst = 0.0f64;
    for _ in 0..FORMULA_PAIRS {
        let len = r.random_range(1..=50);
        let a = random_segment(&mut r, len, 1);
        let b = random_segment(&mut r, len, 1);
        let beta = r.random_range(0.0..5.0);
        let gamma = r.random_range(0.01..=1.0);
        let got = preference_probability(&a, &b, Beta::Finite(beta), gamma)?;
        worst = worst.max((got - direct_probability(&a, &b, beta, gamma)).abs());
    }
    let mut exact_half = true;
    let mut symmetric = true;
    for _ in 0..FORMULA_PAIRS {
        let len = r.random_range(1..=50);
        let a = random_segment(&mut r, len, 1);
        let b = random_segment(&mut r, len, 1);
        let gamma = r.random_range(0.01..=1.0);
        exact_half &= preference_probability(&a, &b, Beta::Finite(0.0), gamma)? == 0.5;
        let rewards: Vec<f64> = a.rewards().collect();
        let same_return = segment_from(&rewards);
        for beta in [Beta::Finite(r.random_range(0.0..5.0)), Beta::Infinite] {
            symmetric &= preference_probability(&a, &same_return, beta, gamma)? == 0.5;
        }
    }
    let elapsed = start.elapsed();
    Ok(outcome(
        worst <= FORMULA_TOL && exact_half && symmetric && within(elapsed, FORMULA_LIMIT),
        format!(
            "max |err| {worst:.2e} over {FORMULA_PAIRS} pairs (tol {FORMULA_TOL:e}); beta=0 -> 0.5: {exact_half}; equal-return symmetry: {symmetric}; {elapsed:.2?}"
        ),
    ))
}

fn criterion_2() -> Result<Outcome> {
    let start = Instant::now();
    let ctx = ThresholdContext::fixed();
    let mut r = rng::stream(2, "acceptance");
    let mut mistake = SimTeacher::new(teacher::TeacherConfig {
        rng_seed: 11,
        ..teacher::preset("mistake")?
    })?;
    let mut flips = 0usize;
    for _ in 0..LABELS {
        let a = random_segment(&mut r, 10, 1);
        let b = random_segment(&mut r, 10, 1);
        let truth = a.true_return() > b.true_return();
        let label = mistake.label(&a, &b, &ctx)?;
        if (label == PreferenceLabel::FirstPreferred) != truth {
            flips += 1;
        }
    }
    let flip_rate = flips as f64 / LABELS as f64;

    let mut stoc = SimTeacher::new(teacher::TeacherConfig {
        rng_seed: 12,
        ..teacher::preset("stoc")?
    })?;
    let mut worst = 0.0f64;
    let mut rates = Vec::new();
    for diff in [0.0, 0.25, 0.8, 1.5, 3.0] {
        let a = segment_from(&[0.5 + diff / 2.0, 0.5 + diff / 2.0]);
        let b = segment_from(&[0.5, 0.5]);
        let p = preference_probability(&a, &b, Beta::Finite(1.0), 1.0)?;
        let wins = (0..LABELS)
            .map(|_| stoc.label(&a, &b, &ctx))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .filter(|l| *l == PreferenceLabel::FirstPreferred)
            .count();
        let rate = wins as f64 / LABELS as f64;
        worst = worst.max((rate - p).abs());
        rates.push(format!("{p:.3}->{rate:.3}"));
    }
    let elapsed = start.elapsed();
    Ok(outcome(
        (FLIP_BAND.0..=FLIP_BAND.1).contains(&flip_rate) && worst <= WIN_RATE_TOL && within(elapsed, STATS_LIMIT),
        format!(
            "mistake flip rate {flip_rate:.4} (band {FLIP_BAND:?}); stoc win rates [{}] max dev {worst:.4} (tol {WIN_RATE_TOL}); {elapsed:.2?}",
            rates.join(", ")
        ),
    ))
}

fn criterion_3() -> Result<Outcome> {
    let start = Instant::now();
    let mut r = rng::stream(3, "acceptance");
    let labels = [
        PreferenceLabel::FirstPreferred,
        PreferenceLabel::SecondPreferred,
        PreferenceLabel::Equal,
    ];
    let mut worst = 0.0f64;
    for trial in 0..GRAD_BATCHES {
        let dim = r.random_range(1..=3);
        let hidden = r.random_range(2..=6);
        let net = Mlp::new(&[2 * dim, hidden, hidden, 1], Activation::LeakyRelu, Activation::Tanh, &mut r);
        let len = r.random_range(1..=6);
        let records: Vec<PreferenceRecord> = (0..r.random_range(1..=8))
            .map(|_| PreferenceRecord {
                seg0: random_segment(&mut r, len, dim),
                seg1: random_segment(&mut r, len, dim),
                label: labels[r.random_range(0..3)],
                query_step: 0,
            })
            .collect();
        let batch: Vec<&PreferenceRecord> = records.iter().collect();
        let smoothing = trial % 2 == 1;
        let (_, grads) = preference_loss_and_gradient(&net, &batch, smoothing)?;
        let analytic = grads.to_flat();
        let params = net.params_flat();
        let mut probe = net.clone();
        let mut numeric = Vec::with_capacity(params.len());
        for i in 0..params.len() {
            let mut p = params.clone();
            p[i] += GRAD_STEP;
            probe.set_params_flat(&p)?;
            let up = preference_loss_and_gradient(&probe, &batch, smoothing)?.0;
            p[i] -= 2.0 * GRAD_STEP;
            probe.set_params_flat(&p)?;
            let down = preference_loss_and_gradient(&probe, &batch, smoothing)?.0;
            numeric.push((up - down) / (2.0 * GRAD_STEP));
        }
        let diff: f64 = analytic.iter().zip(&numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
        let norm_a: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
        let norm_n: f64 = numeric.iter().map(|n| n * n).sum::<f64>().sqrt();
        worst = worst.max(diff / (norm_a + norm_n).max(1e-12));
    }
    let elapsed = start.elapsed();
    Ok(outcome(
        worst < GRAD_REL_TOL && within(elapsed, GRAD_LIMIT),
        format!("{GRAD_BATCHES} minibatches, max relative error {worst:.2e} (tol {GRAD_REL_TOL:e}); {elapsed:.2?}"),
    ))
}

fn brute_top_n(scores: &[f64], n: usize) -> Vec<usize> {
    let rank = |i: usize| {
        scores
            .iter()
            .enumerate()
            .filter(|&(j, &s)| s > scores[i] || (s == scores[i] && j < i))
            .count()
    };
    let mut chosen: Vec<(usize, usize)> = (0..scores.len()).map(|i| (rank(i), i)).filter(|&(k, _)| k < n).collect();
    chosen.sort();
    chosen.into_iter().map(|(_, i)| i).collect()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn optimal_radius(points: &[Vec<f64>], k: usize) -> f64 {
    let n = points.len();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let radius = points
            .iter()
            .map(|p| {
                (0..n)
                    .filter(|c| mask & (1 << c) != 0)
                    .map(|c| dist(p, &points[c]))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max);
        best = best.min(radius);
    }
    best
}

fn criterion_4() -> Result<Outcome> {
    let start = Instant::now();
    let mut r = rng::stream(4, "acceptance");

    let mut topn_ok = true;
    for _ in 0..200 {
        let len = r.random_range(1..=60);
        let scores: Vec<f64> = (0..len).map(|_| (r.random_range(0..20) as f64) / 4.0).collect();
        let n = r.random_range(0..=len);
        topn_ok &= select_by_score(&scores, n)? == brute_top_n(&scores, n);
    }
    let cfg = RewardModelConfig {
        hidden: vec![8, 8],
        ensemble_size: 3,
        ..RewardModelConfig::default()
    };
    let ensemble = RewardEnsemble::new(2, 2, cfg, 4)?;
    let buffer: Vec<Segment> = (0..30).map(|_| random_segment(&mut r, 5, 2)).collect();
    let pool: Vec<(usize, usize)> = (0..100).map(|_| (r.random_range(0..30), r.random_range(0..30))).collect();
    let scores = uncertainty_scores(&buffer, &pool, &ensemble, Uncertainty::Disagreement)?;
    let mut variance_ok = true;
    for (&(i, j), &s) in pool.iter().zip(&scores) {
        let ps: Vec<f64> = (0..ensemble.len())
            .map(|m| network_preference(ensemble.member(m), &buffer[i], &buffer[j]))
            .collect::<Result<_>>()?;
        let mu = ps.iter().sum::<f64>() / ps.len() as f64;
        let var = ps.iter().map(|p| (p - mu).powi(2)).sum::<f64>() / ps.len() as f64;
        variance_ok &= (var - s).abs() <= 1e-15;
    }
    topn_ok &= select_by_score(&scores, 10)? == brute_top_n(&scores, 10);

    let mut worst_ratio = 0.0f64;
    for _ in 0..KCENTER_POOLS {
        let n = r.random_range(1..=KCENTER_MAX_POINTS);
        let points: Vec<Vec<f64>> = (0..n).map(|_| vec![r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)]).collect();
        for k in 1..=n {
            let greedy = covering_radius(&points, &kcenter_select(&points, k)?);
            let opt = optimal_radius(&points, k);
            let ratio = if opt == 0.0 {
                if greedy == 0.0 { 0.0 } else { f64::INFINITY }
            } else {
                greedy / opt
            };
            worst_ratio = worst_ratio.max(ratio);
        }
    }

    let set_rows: Vec<Vec<f64>> = (0..300).map(|_| (0..3).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
    let set = Array2::from_shape_vec((300, 3), set_rows.concat()).expect("shape");
    let mut knn_worst = 0.0f64;
    for q in 0..KNN_QUERIES {
        let query: Vec<f64> = if q % 4 == 0 {
            set_rows[r.random_range(0..300)].clone()
        } else {
            (0..3).map(|_| r.random_range(-1.2..1.2)).collect()
        };
        let k = r.random_range(1..=10);
        let mut ds: Vec<f64> = set_rows.iter().map(|p| dist(p, &query)).collect();
        ds.sort_by(f64::total_cmp);
        let expected = ds[k].max(1e-8).ln();
        knn_worst = knn_worst.max((intrinsic_reward(&query, set.view(), k, 1e-8)? - expected).abs());
    }
    let elapsed = start.elapsed();
    Ok(outcome(
        topn_ok && variance_ok && worst_ratio <= 2.0 && knn_worst <= KNN_TOL && within(elapsed, SAMPLER_LIMIT),
        format!(
            "top-n == brute force: {topn_ok}; disagreement == member variance: {variance_ok}; worst k-center ratio {worst_ratio:.3} (<= 2) over {KCENTER_POOLS} pools of <= {KCENTER_MAX_POINTS}; k-NN max |err| {knn_worst:.1e} over {KNN_QUERIES} queries; {elapsed:.2?}"
        ),
    ))
}

fn criterion_5() -> Result<Outcome> {
    let start = Instant::now();
    let mut r = rng::stream(5, "acceptance");
    let mut exact = true;
    for _ in 0..500 {
        let n = r.random_range(4..40);
        let xs: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..2.0)).collect();
        let mut sorted = xs.clone();
        sorted.sort_by(f64::total_cmp);
        let cut = n / 4;
        let mut acc = 0.0;
        for x in &sorted[cut..n - cut] {
            acc += x;
        }
        exact &= iqm(&xs)? == acc / (n - 2 * cut) as f64;
        let mut gap = 0.0;
        for x in &xs {
            gap += if *x < 1.0 { 1.0 - x } else { 0.0 };
        }
        exact &= optimality_gap(&xs, 1.0)? == gap / n as f64;
        let gt: Vec<f64> = (0..r.random_range(1..10)).map(|_| r.random_range(0.5..2.0)).collect();
        let (mut sp, mut sg) = (0.0, 0.0);
        for x in &xs {
            sp += x;
        }
        for g in &gt {
            sg += g;
        }
        exact &= normalized_return(&xs, &gt)? == (sp / n as f64) / (sg / gt.len() as f64);
    }

    let pops = [Normal::new(0.0, 1.0).expect("normal"), Normal::new(3.0, 2.0).expect("normal")];
    let truth = 1.5;
    let mut covered = 0usize;
    for trial in 0..COVERAGE_TRIALS {
        let strata: Vec<Vec<f64>> = pops.iter().map(|p| (0..50).map(|_| p.sample(&mut r)).collect()).collect();
        let (lo, hi) = bootstrap_ci(&strata, mean, COVERAGE_RESAMPLES, 0.95, trial as u64)?;
        if lo <= truth && truth <= hi {
            covered += 1;
        }
    }
    let coverage = covered as f64 / COVERAGE_TRIALS as f64;
    let elapsed = start.elapsed();
    Ok(outcome(
        exact && (COVERAGE_BAND.0..=COVERAGE_BAND.1).contains(&coverage) && within(elapsed, STATS_ORACLE_LIMIT),
        format!(
            "IQM / optimality gap / normalized return exact: {exact}; bootstrap coverage {coverage:.3} over {COVERAGE_TRIALS} trials (band {COVERAGE_BAND:?}); {elapsed:.2?}"
        ),
    ))
}

fn point_mass_template() -> TrainConfig {
    let mut c = TrainConfig {
        env: "point_mass".into(),
        algo: Algo::Pebble,
        budget: 100,
        total_steps: 10_000,
        session_period: 800,
        eval_every: 1000,
        ..TrainConfig::default()
    };
    c.sac.hidden = vec![32, 32];
    c.sac.batch_size = 64;
    c
}

/// Shared point-mass sweep behind criteria 6 to 8.
struct PointMassSweep {
    report: AggregateReport,
    elapsed: Duration,
    root: tempfile::TempDir,
}

fn point_mass_sweep() -> Result<PointMassSweep> {
    let start = Instant::now();
    let root = tempfile::tempdir().map_err(|e| prefrl_core::Error::InvalidArgument(e.to_string()))?;
    let exp = ExperimentConfig {
        seeds: SEEDS.to_vec(),
        out_dir: None,
        train: point_mass_template(),
        sweep: SweepConfig {
            resamples: CI_RESAMPLES,
            level: CI_LEVEL,
            ..SweepConfig::default()
        },
    };
    let report = harness::sweep_robustness(&exp, root.path())?;
    Ok(PointMassSweep {
        report,
        elapsed: start.elapsed(),
        root,
    })
}

fn cell_line(report: &AggregateReport, teacher: &str) -> String {
    report
        .find("point_mass", teacher, "pebble", 100)
        .and_then(|c| c.get(Aggregate::Iqm))
        .map(|m| format!("{teacher} {:.3} [{:.3}, {:.3}]", m.point, m.lo, m.hi))
        .unwrap_or_else(|| format!("{teacher} missing"))
}

fn criterion_6(s: &PointMassSweep) -> Result<Outcome> {
    let cell = s
        .report
        .find("point_mass", "oracle", "pebble", 100)
        .ok_or_else(|| prefrl_core::Error::Insufficient("oracle cell missing".into()))?;
    let m = cell.get(Aggregate::Iqm).expect("iqm present");
    let baseline: Vec<f64> = harness::find_runs(&s.root.path().join("baseline"))?
        .iter()
        .map(|d| harness::load_summary(d).map(|x| x.score))
        .collect::<Result<_>>()?;
    Ok(outcome(
        cell.runs >= SEEDS.len() && m.point >= NORMALIZED_FLOOR && within(s.elapsed, LEARNING_LIMIT),
        format!(
            "oracle normalized IQM {:.3} [{:.3}, {:.3}] over {} seeds (floor {NORMALIZED_FLOOR}); sac_gt mean return {:.2}; sweep {:.1?}",
            m.point,
            m.lo,
            m.hi,
            cell.runs,
            mean(&baseline)?,
            s.elapsed
        ),
    ))
}

fn criterion_7(s: &PointMassSweep) -> Result<Outcome> {
    let scores = |t: &str| -> Result<Vec<f64>> {
        s.report
            .find("point_mass", t, "pebble", 100)
            .map(|c| c.scores.clone())
            .ok_or_else(|| prefrl_core::Error::Insufficient(format!("{t} cell missing")))
    };
    let oracle = scores("oracle")?;
    let n0 = oracle.len();
    let mut pass = true;
    let mut parts = Vec::new();
    for (t, strict) in [("equal", false), ("mistake", true), ("stoc", true)] {
        let other = scores(t)?;
        let gap = iqm(&oracle)? - iqm(&other)?;
        let (lo, hi) = bootstrap_ci(
            &[oracle.clone(), other],
            |pool: &[f64]| Ok(iqm(&pool[..n0])? - iqm(&pool[n0..])?),
            CI_RESAMPLES,
            CI_LEVEL,
            7,
        )?;
        let half = (hi - lo) / 2.0;
        let ok = if strict { gap > 0.0 && gap > half } else { gap >= 0.0 };
        pass &= ok;
        parts.push(format!(
            "oracle-{t} gap {gap:.3} (CI half-width {half:.3}, {}) {}",
            if strict { "gap > half-width" } else { "gap >= 0" },
            if ok { "ok" } else { "violated" }
        ));
    }
    let cells: Vec<String> = teacher::PRESET_NAMES.iter().map(|t| cell_line(&s.report, t)).collect();
    Ok(outcome(pass, format!("{}; IQM cells: {}", parts.join("; "), cells.join(", "))))
}

fn criterion_8(s: &PointMassSweep) -> Result<Outcome> {
    let mut rhos = Vec::new();
    let mut consistent = true;
    for seed in SEEDS {
        let cfg = TrainConfig {
            seed,
            ..point_mass_template()
        };
        let out = train_preference_rl(&cfg)?;
        let stored = harness::load_run(&harness::run_dir(&s.root.path().join("budget_100"), &cfg))?;
        consistent &= stored == out.record;
        let steps = &out.final_eval.steps[..ALIGNMENT_STEPS.min(out.final_eval.steps.len())];
        let ensemble = out.ensemble.as_ref().expect("preference run has an ensemble");
        rhos.push(reward_alignment(steps, ensemble)?.spearman.unwrap_or(f64::NAN));
    }
    let steps = ALIGNMENT_STEPS;
    let min = rhos.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(outcome(
        min >= ALIGNMENT_FLOOR && consistent,
        format!(
            "Spearman per oracle seed over {steps} evaluation steps: [{}] (floor {ALIGNMENT_FLOOR}); rerun matches sweep: {consistent}",
            rhos.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join(", ")
        ),
    ))
}

fn criterion_9() -> Result<Outcome> {
    let start = Instant::now();
    let mut scores = Vec::new();
    for scheme in ["disagreement", "uniform"] {
        let mut per_seed = Vec::new();
        for seed in SEEDS {
            let mut c = TrainConfig {
                env: "push".into(),
                algo: Algo::Pebble,
                budget: 200,
                total_steps: 25_000,
                session_period: 2300,
                eval_every: 1000,
                seed,
                ..TrainConfig::default()
            };
            c.sampler.scheme = scheme.parse()?;
            c.sac.hidden = vec![32, 32];
            c.sac.batch_size = 64;
            c.sac.alpha = 0.01;
            per_seed.push(train_preference_rl(&c)?.record.score()?);
        }
        scores.push(per_seed);
    }
    let (dis, uni) = (&scores[0], &scores[1]);
    let ci = |xs: &Vec<f64>| bootstrap_ci(&[xs.clone()], iqm, CI_RESAMPLES, CI_LEVEL, 9);
    let (dlo, dhi) = ci(dis)?;
    let (ulo, uhi) = ci(uni)?;
    let (d, u) = (iqm(dis)?, iqm(uni)?);
    let separated = dlo > uhi || ulo > dhi;
    Ok(outcome(
        d >= u,
        format!(
            "push success IQM disagreement {d:.3} [{dlo:.3}, {dhi:.3}] vs uniform {u:.3} [{ulo:.3}, {uhi:.3}]; per-seed {dis:?} vs {uni:?}; CIs {}; {:.1?}",
            if separated { "separate" } else { "do not separate" },
            start.elapsed()
        ),
    ))
}

fn curve_bytes(out: &Path, cfg: &TrainConfig) -> Result<Vec<u8>> {
    let p = harness::run_dir(out, cfg).join(harness::CURVE_FILE);
    std::fs::read(&p).map_err(|e| prefrl_core::Error::InvalidArgument(format!("{}: {e}", p.display())))
}

fn criterion_10() -> Result<Outcome> {
    let mut identical = true;
    let mut checked = Vec::new();
    for (algo, env, teacher_name) in [
        (Algo::Pebble, "point_mass", "stoc"),
        (Algo::Prefppo, "pendulum", "mistake"),
        (Algo::SacGt, "push", "oracle"),
    ] {
        let mut train = prefrl_core::agents::with_teacher(point_mass_template(), teacher_name)?;
        train.algo = algo;
        train.env = env.into();
        train.total_steps = 4000;
        train.session_period = 500;
        train.budget = 20;
        train.eval_every = 500;
        train.ppo.rollout_len = 250;
        let exp = ExperimentConfig {
            seeds: vec![13],
            train,
            ..ExperimentConfig::default()
        };
        let a = tempfile::tempdir().map_err(|e| prefrl_core::Error::InvalidArgument(e.to_string()))?;
        let b = tempfile::tempdir().map_err(|e| prefrl_core::Error::InvalidArgument(e.to_string()))?;
        harness::run(&exp, a.path())?;
        harness::run(&exp, b.path())?;
        let cfg = &exp.runs()[0];
        let same = curve_bytes(a.path(), cfg)? == curve_bytes(b.path(), cfg)?;
        identical &= same;
        checked.push(format!("{env}/{algo}/{teacher_name}: {}", if same { "identical" } else { "DIFFERENT" }));
    }
    Ok(outcome(identical, checked.join(", ")))
}

fn main() {
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |n: u32| only.as_ref().is_none_or(|v| v.contains(&n));
    let mut results: Vec<(u32, &str, Result<Outcome>)> = Vec::new();
    type Criterion = (u32, &'static str, fn() -> Result<Outcome>);
    let early: [Criterion; 5] = [
        (1, "teacher formula fidelity", criterion_1),
        (2, "teacher statistics", criterion_2),
        (3, "reward-learning gradients", criterion_3),
        (4, "sampler oracles", criterion_4),
        (5, "statistics oracles", criterion_5),
    ];
    for (n, name, f) in early {
        if wanted(n) {
            results.push((n, name, f()));
            report(results.last().expect("just pushed"));
        }
    }
    if wanted(6) || wanted(7) || wanted(8) {
        match point_mass_sweep() {
            Ok(s) => {
                let late: [(u32, &str, fn(&PointMassSweep) -> Result<Outcome>); 3] = [
                    (6, "end-to-end learning", criterion_6),
                    (7, "robustness ordering", criterion_7),
                    (8, "reward alignment", criterion_8),
                ];
                for (n, name, f) in late {
                    if wanted(n) {
                        results.push((n, name, f(&s)));
                        report(results.last().expect("just pushed"));
                    }
                }
            }
            Err(e) => {
                for (n, name) in [(6, "end-to-end learning"), (7, "robustness ordering"), (8, "reward alignment")] {
                    if wanted(n) {
                        results.push((n, name, Err(prefrl_core::Error::InvalidArgument(format!("sweep failed: {e}")))));
                        report(results.last().expect("just pushed"));
                    }
                }
            }
        }
    }
    if wanted(9) {
        results.push((9, "sampling-scheme ordering", criterion_9()));
        report(results.last().expect("just pushed"));
    }
    if wanted(10) {
        results.push((10, "determinism", criterion_10()));
        report(results.last().expect("just pushed"));
    }
    let failed = results.iter().filter(|(_, _, r)| !matches!(r, Ok(o) if o.pass)).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn report((n, name, result): &(u32, &str, Result<Outcome>)) {
    match result {
        Ok(o) => println!("criterion {n:>2} {} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail),
        Err(e) => println!("criterion {n:>2} FAIL {name}: error: {e}"),
    }
}
