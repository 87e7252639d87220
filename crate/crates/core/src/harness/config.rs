use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agents::TrainConfig;
use crate::error::{Error, Result};
use crate::evalstats::BootstrapSettings;
use crate::teacher::{self, PRESET_NAMES};

/// Everything a `run` or `sweep` needs; `train` is the per-run template whose
/// `seed` is replaced by each entry of `seeds`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seeds: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    pub train: TrainConfig,
    pub sweep: SweepConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub teachers: Vec<String>,
    /// Budgets to sweep; empty means the template's budget only.
    pub budgets: Vec<usize>,
    pub resamples: usize,
    pub level: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            teachers: PRESET_NAMES.iter().map(|s| s.to_string()).collect(),
            budgets: Vec::new(),
            resamples: 2000,
            level: 0.95,
        }
    }
}

impl SweepConfig {
    pub fn bootstrap(&self, seed: u64) -> BootstrapSettings {
        BootstrapSettings {
            resamples: self.resamples,
            level: self.level,
            seed,
        }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seeds: vec![0],
            out_dir: None,
            train: TrainConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

/// Parse a `--set` value as a TOML literal, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Apply one `dotted.key=value` override, creating tables on the way.
pub fn apply_override(root: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("bad override key `{key}`")));
    }
    let mut table = root;
    for part in &parts[..parts.len() - 1] {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override `{key}` descends into a non-table")))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

fn to_table<T: Serialize>(v: &T) -> Result<toml::Table> {
    toml::Table::try_from(v).map_err(|e| Error::Config(e.to_string()))
}

/// Overlay `top` onto `base`, recursing into tables.
fn merge(base: &mut toml::Table, top: &toml::Table) {
    for (k, v) in top {
        match (base.get_mut(k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => merge(b, t),
            _ => {
                base.insert(k.clone(), v.clone());
            }
        }
    }
}

impl ExperimentConfig {
    /// Parse TOML text, apply overrides, and resolve the teacher preset named
    /// by `train.teacher_name` underneath any explicit `train.teacher` keys.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let mut root: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut root, o)?;
        }
        let preset_name = root
            .get("train")
            .and_then(|t| t.get("teacher_name"))
            .and_then(|v| v.as_str())
            .map(str::to_string);
        if let Some(name) = preset_name.filter(|n| PRESET_NAMES.contains(&n.as_str())) {
            let mut teacher = to_table(&teacher::preset(&name)?)?;
            let train = root
                .entry("train")
                .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                .as_table_mut()
                .ok_or_else(|| Error::Config("`train` must be a table".into()))?;
            if let Some(toml::Value::Table(explicit)) = train.get("teacher") {
                merge(&mut teacher, explicit);
            }
            train.insert("teacher".into(), toml::Value::Table(teacher));
        }
        let cfg: ExperimentConfig = toml::Value::Table(root)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, overrides)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        let mut seen = std::collections::HashSet::new();
        if !self.seeds.iter().all(|s| seen.insert(*s)) {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        for s in &self.seeds {
            TrainConfig {
                seed: *s,
                ..self.train.clone()
            }
            .validate()?;
        }
        Ok(())
    }

    /// Per-seed training configs.
    pub fn runs(&self) -> Vec<TrainConfig> {
        self.seeds
            .iter()
            .map(|&seed| TrainConfig {
                seed,
                ..self.train.clone()
            })
            .collect()
    }

    /// Snapshot reproducing exactly one run.
    pub fn single(train: &TrainConfig) -> Self {
        ExperimentConfig {
            seeds: vec![train.seed],
            out_dir: None,
            train: train.clone(),
            sweep: SweepConfig::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::Algo;
    use crate::teacher::Beta;

    #[test]
    fn overrides_walk_dotted_paths() {
        let cfg = ExperimentConfig::from_toml(
            "seeds = [1, 2]\n[train]\nbudget = 10\n",
            &[
                "train.budget=40".into(),
                "train.sac.alpha=0.05".into(),
                "train.algo=sac_gt".into(),
                "train.env=push".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.seeds, vec![1, 2]);
        assert_eq!(cfg.train.budget, 40);
        assert_eq!(cfg.train.sac.alpha, 0.05);
        assert_eq!(cfg.train.algo, Algo::SacGt);
        assert_eq!(cfg.train.env, "push");
    }

    #[test]
    fn preset_fills_teacher_and_explicit_keys_win() {
        let cfg = ExperimentConfig::from_toml(
            "[train]\nteacher_name = \"stoc\"\n[train.teacher]\ngamma = 0.5\n",
            &[],
        )
        .unwrap();
        assert_eq!(cfg.train.teacher.beta, Beta::Finite(1.0));
        assert_eq!(cfg.train.teacher.gamma, 0.5);
        let m = ExperimentConfig::from_toml("", &["train.teacher_name=mistake".into()]).unwrap();
        assert_eq!(m.train.teacher.epsilon_mistake, 0.1);
    }

    #[test]
    fn snapshot_roundtrips() {
        let mut cfg = ExperimentConfig::from_toml("", &["train.teacher_name=equal".into()]).unwrap();
        cfg.train.schedule_exponent = Some(1.5);
        let text = cfg.to_toml().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text, &[]).unwrap(), cfg);
    }

    #[test]
    fn bad_overrides_are_rejected() {
        assert!(ExperimentConfig::from_toml("", &["nonsense".into()]).is_err());
        assert!(ExperimentConfig::from_toml("", &["train.budget.x=1".into()]).is_err());
        assert!(ExperimentConfig::from_toml("", &["train.algo=walker".into()]).is_err());
    }

    #[test]
    fn validation_catches_bad_runs() {
        let mut cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        cfg.seeds = vec![];
        assert!(cfg.validate().is_err());
        cfg.seeds = vec![3, 3];
        assert!(cfg.validate().is_err());
        cfg.seeds = vec![0];
        cfg.train.budget = 3;
        assert!(cfg.validate().is_err(), "fewer queries than sessions");
    }
}
