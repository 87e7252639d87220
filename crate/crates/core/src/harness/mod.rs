//! Experiment orchestration: seed fan-out, per-run persistence, the teacher
//! robustness sweep and post-hoc aggregation over result directories.
//!
//! Each run lives in `<out>/<env>/<algo>/<teacher>/seed_<n>/` and holds
//! `curve.csv`, `records.jsonl`, `config.snapshot` and `summary.json`.

mod config;

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{apply_override, ExperimentConfig, SweepConfig};

use crate::agents::{train_preference_rl, with_teacher, Algo, SessionLog, TrainConfig, TrainOutput};
use crate::envsim::Metric;
use crate::error::{Error, Result};
use crate::evalstats::{
    normalize_scores, read_curve_csv, summarize_cell, write_curve_csv, AggregateReport, BootstrapSettings, Cell,
    RunRecord,
};
use crate::teacher::{PreferenceLabel, PreferenceRecord};

pub const CURVE_FILE: &str = "curve.csv";
pub const RECORDS_FILE: &str = "records.jsonl";
pub const SNAPSHOT_FILE: &str = "config.snapshot";
pub const SUMMARY_FILE: &str = "summary.json";
pub const REPORT_FILE: &str = "report.json";
pub const PLOT_FILE: &str = "plot.csv";
pub const CURVES_FILE: &str = "curves.csv";

/// Teacher label used for ground-truth-reward runs.
pub const NO_TEACHER: &str = "none";

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub issued: usize,
    pub first: usize,
    pub second: usize,
    pub equal: usize,
    pub skipped: usize,
}

impl LabelCounts {
    pub fn tally(records: &[PreferenceRecord]) -> Self {
        let mut c = LabelCounts {
            issued: records.len(),
            ..Default::default()
        };
        for r in records {
            match r.label {
                PreferenceLabel::FirstPreferred => c.first += 1,
                PreferenceLabel::SecondPreferred => c.second += 1,
                PreferenceLabel::Equal => c.equal += 1,
                PreferenceLabel::Skipped => c.skipped += 1,
            }
        }
        c
    }
}

/// Contents of `summary.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub env: String,
    pub algo: String,
    pub teacher: String,
    pub seed: u64,
    pub budget: usize,
    pub metric: Metric,
    pub score: f64,
    pub final_returns: Vec<f64>,
    pub final_successes: Vec<f64>,
    pub sessions: Vec<SessionLog>,
    pub labels: LabelCounts,
    pub exact_ties: u64,
}

impl RunSummary {
    fn new(out: &TrainOutput) -> Result<Self> {
        let r = &out.record;
        Ok(RunSummary {
            run_id: r.run_id.clone(),
            env: r.env.clone(),
            algo: r.algo.clone(),
            teacher: r.teacher.clone(),
            seed: r.seed,
            budget: r.budget,
            metric: r.metric,
            score: r.score()?,
            final_returns: r.final_returns.clone(),
            final_successes: r.final_successes.clone(),
            sessions: out.sessions.clone(),
            labels: LabelCounts::tally(&out.preferences),
            exact_ties: out.exact_ties,
        })
    }

    fn into_record(self, curve: Vec<crate::evalstats::CurveRow>) -> RunRecord {
        RunRecord {
            run_id: self.run_id,
            seed: self.seed,
            teacher: self.teacher,
            algo: self.algo,
            env: self.env,
            budget: self.budget,
            metric: self.metric,
            curve,
            final_returns: self.final_returns,
            final_successes: self.final_successes,
        }
    }
}

pub fn run_dir(out: &Path, cfg: &TrainConfig) -> PathBuf {
    out.join(&cfg.env)
        .join(cfg.algo.name())
        .join(&cfg.teacher_name)
        .join(format!("seed_{}", cfg.seed))
}

fn ensure_writable(out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let probe = out.join(".write-probe");
    fs::write(&probe, b"").map_err(|e| Error::io(&probe, e))?;
    fs::remove_file(&probe).map_err(|e| Error::io(&probe, e))
}

fn write_records(path: &Path, records: &[PreferenceRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_records(path: &Path) -> Result<Vec<PreferenceRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Persist one finished run under `out`, returning its directory.
pub fn write_run(out: &Path, cfg: &TrainConfig, output: &TrainOutput) -> Result<PathBuf> {
    let dir = run_dir(out, cfg);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    write_curve_csv(&dir.join(CURVE_FILE), &output.record.curve)?;
    write_records(&dir.join(RECORDS_FILE), &output.preferences)?;
    let snapshot = dir.join(SNAPSHOT_FILE);
    fs::write(&snapshot, ExperimentConfig::single(cfg).to_toml()?).map_err(|e| Error::io(&snapshot, e))?;
    let summary = dir.join(SUMMARY_FILE);
    let text = serde_json::to_string_pretty(&RunSummary::new(output)?)?;
    fs::write(&summary, text).map_err(|e| Error::io(&summary, e))?;
    Ok(dir)
}

pub fn load_summary(dir: &Path) -> Result<RunSummary> {
    let path = dir.join(SUMMARY_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn load_run(dir: &Path) -> Result<RunRecord> {
    let curve = read_curve_csv(&dir.join(CURVE_FILE))?;
    Ok(load_summary(dir)?.into_record(curve))
}

/// Every run directory below `root`, sorted.
pub fn find_runs(root: &Path) -> Result<Vec<PathBuf>> {
    let mut found = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        if dir.join(SUMMARY_FILE).is_file() {
            found.push(dir);
            continue;
        }
        let entries = fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(&dir, e))?;
            if entry.file_type().map_err(|e| Error::io(entry.path(), e))?.is_dir() {
                stack.push(entry.path());
            }
        }
    }
    found.sort();
    Ok(found)
}

fn execute(configs: &[TrainConfig], out: &Path) -> Result<Vec<RunRecord>> {
    for c in configs {
        c.validate()?;
    }
    ensure_writable(out)?;
    configs
        .par_iter()
        .map(|c| {
            let output = train_preference_rl(c)?;
            write_run(out, c, &output)?;
            Ok(output.record)
        })
        .collect()
}

/// Train every seed of `exp` and persist the results under `out`.
pub fn run(exp: &ExperimentConfig, out: &Path) -> Result<Vec<RunRecord>> {
    exp.validate()?;
    execute(&exp.runs(), out)
}

/// Score every cell, normalizing return-metric tasks by the mean score of
/// the ground-truth learner of the same family on the same task.
pub fn aggregate(records: &[RunRecord], boot: BootstrapSettings) -> Result<AggregateReport> {
    let mut cells: BTreeMap<(String, String, String, usize), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        cells
            .entry((r.env.clone(), r.algo.clone(), r.teacher.clone(), r.budget))
            .or_default()
            .push(r);
    }
    let mut report = AggregateReport::default();
    for ((env, algo, teacher, budget), mut runs) in cells {
        runs.sort_by_key(|r| r.seed);
        let raw: Vec<f64> = runs.iter().map(|r| r.score()).collect::<Result<_>>()?;
        let scores = if runs[0].metric == Metric::SuccessRate {
            raw
        } else {
            let base_algo = algo.parse::<Algo>()?.baseline();
            let base: Vec<f64> = records
                .iter()
                .filter(|r| r.env == env && r.algo == base_algo.name())
                .map(RunRecord::score)
                .collect::<Result<_>>()?;
            if base.is_empty() {
                return Err(Error::Insufficient(format!(
                    "no {base_algo} runs on {env} to normalize {algo}/{teacher} against"
                )));
            }
            normalize_scores(&raw, &base)?
        };
        report.cells.push(Cell {
            metrics: summarize_cell(&scores, boot)?,
            env,
            teacher,
            algo,
            budget,
            runs: runs.len(),
            scores,
        });
    }
    Ok(report)
}

/// Aggregate every run found below `root`.
pub fn eval(root: &Path, boot: BootstrapSettings) -> Result<AggregateReport> {
    let records: Vec<RunRecord> = find_runs(root)?.iter().map(|d| load_run(d)).collect::<Result<_>>()?;
    if records.is_empty() {
        return Err(Error::Insufficient(format!("no runs under {}", root.display())));
    }
    aggregate(&records, boot)
}

/// The configs a robustness sweep trains: every teacher at every budget
/// under `<out>/budget_<b>`, plus one ground-truth baseline per seed under
/// `<out>/baseline`.
pub fn sweep_plan(exp: &ExperimentConfig, out: &Path) -> Result<Vec<(PathBuf, TrainConfig)>> {
    let budgets = if exp.sweep.budgets.is_empty() {
        vec![exp.train.budget]
    } else {
        exp.sweep.budgets.clone()
    };
    let mut plan = Vec::new();
    for &budget in &budgets {
        for teacher in &exp.sweep.teachers {
            for &seed in &exp.seeds {
                let mut c = with_teacher(exp.train.clone(), teacher)?;
                c.budget = budget;
                c.seed = seed;
                plan.push((out.join(format!("budget_{budget}")), c));
            }
        }
    }
    for &seed in &exp.seeds {
        let mut c = exp.train.clone();
        c.algo = c.algo.baseline();
        c.teacher_name = NO_TEACHER.into();
        c.budget = 0;
        c.seed = seed;
        plan.push((out.join("baseline"), c));
    }
    Ok(plan)
}

/// Run the full teacher sweep and write `report.json` and `plot.csv` to `out`.
pub fn sweep_robustness(exp: &ExperimentConfig, out: &Path) -> Result<AggregateReport> {
    exp.validate()?;
    let plan = sweep_plan(exp, out)?;
    for (_, c) in &plan {
        c.validate()?;
    }
    ensure_writable(out)?;
    let records: Vec<RunRecord> = plan
        .par_iter()
        .map(|(root, c)| {
            let output = train_preference_rl(c)?;
            write_run(root, c, &output)?;
            Ok(output.record)
        })
        .collect::<Result<_>>()?;
    let report = aggregate(&records, exp.sweep.bootstrap(exp.train.seed))?;
    report.write_json(&out.join(REPORT_FILE))?;
    report.write_plot_csv(&out.join(PLOT_FILE))?;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelStats {
    pub run_id: String,
    pub teacher: String,
    pub issued: usize,
    pub skip_fraction: f64,
    pub equal_fraction: f64,
    /// Fraction of forced-choice labels that contradict the sign of the
    /// undiscounted true segment-return difference; `None` with no such labels.
    pub mistake_estimate: Option<f64>,
}

pub fn label_stats_for(run_id: &str, teacher: &str, records: &[PreferenceRecord]) -> LabelStats {
    let counts = LabelCounts::tally(records);
    let frac = |k: usize| if counts.issued == 0 { 0.0 } else { k as f64 / counts.issued as f64 };
    let mut judged = 0usize;
    let mut wrong = 0usize;
    for r in records {
        let diff = r.seg0.true_return() - r.seg1.true_return();
        let said_first = match r.label {
            PreferenceLabel::FirstPreferred => true,
            PreferenceLabel::SecondPreferred => false,
            _ => continue,
        };
        if diff == 0.0 {
            continue;
        }
        judged += 1;
        if said_first != (diff > 0.0) {
            wrong += 1;
        }
    }
    LabelStats {
        run_id: run_id.to_string(),
        teacher: teacher.to_string(),
        issued: counts.issued,
        skip_fraction: frac(counts.skipped),
        equal_fraction: frac(counts.equal),
        mistake_estimate: (judged > 0).then(|| wrong as f64 / judged as f64),
    }
}

/// Label statistics for every run below `root`.
pub fn label_stats(root: &Path) -> Result<Vec<LabelStats>> {
    find_runs(root)?
        .iter()
        .map(|dir| {
            let s = load_summary(dir)?;
            let records = read_records(&dir.join(RECORDS_FILE))?;
            Ok(label_stats_for(&s.run_id, &s.teacher, &records))
        })
        .collect()
}

/// Concatenate every run's learning curve below `root` into one long-format
/// CSV at `dest`, prefixed with the run's identifying columns.
pub fn plot_data(root: &Path, dest: &Path) -> Result<usize> {
    let dirs = find_runs(root)?;
    let file = File::create(dest).map_err(|e| Error::io(dest, e))?;
    let mut w = csv::Writer::from_writer(file);
    let mut header = vec!["env", "algo", "teacher", "budget", "seed"];
    header.extend(crate::evalstats::CURVE_HEADER);
    w.write_record(&header)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut rows = 0;
    for dir in &dirs {
        let r = load_run(dir)?;
        for c in &r.curve {
            w.write_record([
                r.env.clone(),
                r.algo.clone(),
                r.teacher.clone(),
                r.budget.to_string(),
                r.seed.to_string(),
                c.step.to_string(),
                c.true_return.to_string(),
                opt(c.success),
                c.queries_used.to_string(),
                opt(c.reward_loss),
                opt(c.ensemble_disagreement),
            ])?;
            rows += 1;
        }
    }
    w.flush().map_err(|e| Error::io(dest, e))?;
    Ok(rows)
}
