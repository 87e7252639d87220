use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use prefrl_core::evalstats::{AggregateReport, BootstrapSettings};
use prefrl_core::harness::{self, ExperimentConfig};
use prefrl_core::teacher::PRESET_NAMES;

#[derive(Parser)]
#[command(name = "prefrl", version, about = "Preference-based RL experiments with simulated teachers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every configured seed and write one directory per run.
    Run(ExperimentArgs),
    /// Train all teacher presets (plus the ground-truth baseline) and aggregate.
    Sweep {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Comma-separated query budgets; defaults to the config's budget.
        #[arg(long, value_delimiter = ',')]
        budgets: Vec<usize>,
    },
    /// Aggregate finished runs into report.json and plot.csv.
    Eval {
        #[command(flatten)]
        dir: DirArgs,
        #[arg(long, default_value_t = 2000)]
        resamples: usize,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        #[arg(long, default_value_t = 0)]
        bootstrap_seed: u64,
    },
    /// Skip, equal and mistake fractions of every run's stored labels, as CSV.
    LabelStats {
        #[command(flatten)]
        dir: DirArgs,
    },
    /// Concatenate every run's learning curve into one CSV.
    PlotData {
        #[command(flatten)]
        dir: DirArgs,
        /// Destination file; defaults to `<out>/curves.csv`.
        #[arg(long)]
        dest: Option<PathBuf>,
    },
}

#[derive(Args)]
struct DirArgs {
    /// Results root.
    #[arg(long, env = "PREFRL_OUT", default_value = "runs")]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dotted-path override such as `train.sac.alpha=0.05`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Teacher preset: oracle, stoc, mistake, skip, equal or myopic.
    #[arg(long)]
    teacher: Option<String>,
    /// Query sampling scheme, e.g. uniform or disagreement.
    #[arg(long)]
    sampler: Option<String>,
    /// Feedback schedule: uniform, decay or increase.
    #[arg(long)]
    schedule: Option<String>,
    /// pebble, prefppo, sac_gt or ppo_gt.
    #[arg(long)]
    algo: Option<String>,
    /// point_mass, pendulum or push.
    #[arg(long)]
    env: Option<String>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Results root; overrides the config's out_dir.
    #[arg(long, env = "PREFRL_OUT")]
    out: Option<PathBuf>,
}

fn quoted(v: &str) -> String {
    format!("{v:?}")
}

impl ExperimentArgs {
    fn load(&self) -> Result<(ExperimentConfig, PathBuf)> {
        if let Some(t) = &self.teacher {
            if !PRESET_NAMES.contains(&t.as_str()) {
                bail!("unknown teacher preset `{t}`; expected one of {}", PRESET_NAMES.join(", "));
            }
        }
        let mut overrides = Vec::new();
        let shorthand = [
            ("train.teacher_name", &self.teacher),
            ("train.sampler.scheme", &self.sampler),
            ("train.schedule", &self.schedule),
            ("train.algo", &self.algo),
            ("train.env", &self.env),
        ];
        for (key, value) in shorthand {
            if let Some(v) = value {
                overrides.push(format!("{key}={}", quoted(v)));
            }
        }
        if !self.seeds.is_empty() {
            let list: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
            overrides.push(format!("seeds=[{}]", list.join(",")));
        }
        overrides.extend(self.overrides.iter().cloned());
        let text = match &self.config {
            Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
            None => String::new(),
        };
        let cfg = ExperimentConfig::from_toml(&text, &overrides)?;
        let out = self
            .out
            .clone()
            .or_else(|| cfg.out_dir.clone())
            .unwrap_or_else(|| PathBuf::from("runs"));
        Ok((cfg, out))
    }
}

fn print_report(report: &AggregateReport) {
    println!("env,teacher,algo,budget,runs,metric,point,lo,hi");
    for c in &report.cells {
        for m in &c.metrics {
            println!(
                "{},{},{},{},{},{},{:.4},{:.4},{:.4}",
                c.env,
                c.teacher,
                c.algo,
                c.budget,
                c.runs,
                m.metric.name(),
                m.point,
                m.lo,
                m.hi
            );
        }
    }
}

fn require_dir(dir: &Path) -> Result<()> {
    if !dir.is_dir() {
        bail!("results directory {} does not exist", dir.display());
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => {
            let (cfg, out) = args.load()?;
            let records = harness::run(&cfg, &out)?;
            println!("run_id,score,queries_used");
            for r in &records {
                let used = r.curve.last().map_or(0, |c| c.queries_used);
                println!("{},{:.4},{used}", r.run_id, r.score()?);
            }
            eprintln!("wrote {} run(s) under {}", records.len(), out.display());
        }
        Command::Sweep { exp, budgets } => {
            let (mut cfg, out) = exp.load()?;
            if !budgets.is_empty() {
                cfg.sweep.budgets = budgets;
            }
            let report = harness::sweep_robustness(&cfg, &out)?;
            print_report(&report);
            eprintln!("wrote {} and {}", out.join(harness::REPORT_FILE).display(), out.join(harness::PLOT_FILE).display());
        }
        Command::Eval {
            dir,
            resamples,
            level,
            bootstrap_seed,
        } => {
            require_dir(&dir.out)?;
            let boot = BootstrapSettings {
                resamples,
                level,
                seed: bootstrap_seed,
            };
            let report = harness::eval(&dir.out, boot)?;
            report.write_json(&dir.out.join(harness::REPORT_FILE))?;
            report.write_plot_csv(&dir.out.join(harness::PLOT_FILE))?;
            print_report(&report);
        }
        Command::LabelStats { dir } => {
            require_dir(&dir.out)?;
            println!("run_id,teacher,issued,skip_fraction,equal_fraction,mistake_estimate");
            for s in harness::label_stats(&dir.out)? {
                let mistake = s.mistake_estimate.map(|m| format!("{m:.4}")).unwrap_or_default();
                println!(
                    "{},{},{},{:.4},{:.4},{mistake}",
                    s.run_id, s.teacher, s.issued, s.skip_fraction, s.equal_fraction
                );
            }
        }
        Command::PlotData { dir, dest } => {
            require_dir(&dir.out)?;
            let dest = dest.unwrap_or_else(|| dir.out.join(harness::CURVES_FILE));
            let rows = harness::plot_data(&dir.out, &dest)?;
            eprintln!("wrote {rows} rows to {}", dest.display());
        }
    }
    Ok(())
}
