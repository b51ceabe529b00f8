//! Flat key-value experiment configuration.
//!
//! A config file is a TOML document with top-level keys only. Every key has a
//! default, so an empty file is a valid configuration. Values are validated
//! on load and errors name the offending key.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use toml::Value;

use crate::error::{Error, Result};
use crate::explore::{DecayKind, ExplorationConfig, InitScheme, SamplingMode};
use crate::simnet::{BnMode, RunConfig, RunMode, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Blobs,
    Spirals,
    Idx,
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetKind::Blobs => "blobs",
            DatasetKind::Spirals => "spirals",
            DatasetKind::Idx => "idx",
        })
    }
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "blobs" => Ok(DatasetKind::Blobs),
            "spirals" => Ok(DatasetKind::Spirals),
            "idx" => Ok(DatasetKind::Idx),
            other => Err(Error::InvalidArgument(format!(
                "unknown dataset `{other}`, expected blobs, spirals or idx"
            ))),
        }
    }
}

/// Where the samples come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub kind: DatasetKind,
    pub n: usize,
    pub classes: usize,
    pub noise: f64,
    pub seed: u64,
    pub idx_images: Option<PathBuf>,
    pub idx_labels: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mode: RunMode,
    pub sparsity: f64,
    pub delta0: f64,
    /// Iterations between exploration steps; derived from `dt_epochs` when unset.
    pub dt_iters: Option<u64>,
    pub dt_epochs: f64,
    pub t_max_fraction: f64,
    pub scheduler: DecayKind,
    pub init_scheme: InitScheme,
    pub sampling: SamplingMode,
    pub widths: Vec<usize>,
    pub bn_mode: BnMode,
    pub lr: f64,
    pub momentum: f64,
    pub warmup: f64,
    pub label_smoothing: f64,
    pub batch_size: usize,
    pub epochs: u64,
    /// Overrides `epochs` when set.
    pub iterations: Option<u64>,
    /// Defaults to one toy epoch.
    pub eval_every: Option<u64>,
    pub dataset: DatasetSpec,
    pub seed: u64,
    /// Output directory; not part of the experiment identity, so it is left
    /// out of checkpoints.
    #[serde(skip, default = "default_out")]
    pub out: PathBuf,
}

fn default_out() -> PathBuf {
    PathBuf::from("chex-out")
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mode: RunMode::Chex,
            sparsity: 0.5,
            delta0: 0.3,
            dt_iters: None,
            dt_epochs: 2.0,
            t_max_fraction: 0.8,
            scheduler: DecayKind::Cosine,
            init_scheme: InitScheme::Mru,
            sampling: SamplingMode::Importance,
            widths: vec![64, 64],
            bn_mode: BnMode::Standardize,
            lr: 0.1,
            momentum: 0.9,
            warmup: 0.05,
            label_smoothing: 0.0,
            batch_size: 64,
            epochs: 100,
            iterations: None,
            eval_every: None,
            dataset: DatasetSpec {
                kind: DatasetKind::Spirals,
                n: 3000,
                classes: 3,
                noise: 0.1,
                seed: 0,
                idx_images: None,
                idx_labels: None,
            },
            seed: 0,
            out: default_out(),
        }
    }
}

/// A parsed config together with non-fatal findings.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub warnings: Vec<String>,
}

const EXPLORATION_KEYS: &[&str] = &["delta0", "dt_iters", "dt_epochs", "t_max_fraction"];
const REGROW_KEYS: &[&str] = &["delta0", "scheduler", "init_scheme", "sampling"];

pub fn load_config(path: &Path) -> Result<LoadedConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<LoadedConfig> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::config("config", e.message().to_string()))?;
    let mut cfg = ExperimentConfig::default();
    let mut warnings = Vec::new();
    for (key, value) in &table {
        apply_key(&mut cfg, key, value, &mut warnings)?;
    }
    let present = |k: &str| table.contains_key(k);
    match cfg.mode {
        RunMode::Plain => {
            for k in ["S"].iter().chain(EXPLORATION_KEYS).chain(REGROW_KEYS) {
                if present(k) {
                    warnings.push(format!("`{k}` is ignored in plain mode"));
                }
            }
        }
        RunMode::OneShotEarly => {
            for k in EXPLORATION_KEYS.iter().chain(REGROW_KEYS) {
                if present(k) && *k != "delta0" {
                    warnings.push(format!("`{k}` is ignored in one_shot_early mode"));
                }
            }
            if present("delta0") {
                warnings.push("`delta0` is ignored in one_shot_early mode".into());
            }
        }
        RunMode::Gradual => {
            for k in REGROW_KEYS {
                if present(k) {
                    warnings.push(format!("`{k}` is ignored in gradual mode"));
                }
            }
        }
        RunMode::Chex => {}
    }
    if cfg.dataset.kind != DatasetKind::Idx {
        for k in ["idx_images", "idx_labels"] {
            if present(k) {
                warnings.push(format!("`{k}` is ignored for generated datasets"));
            }
        }
    }
    cfg.validate()?;
    warnings.dedup();
    Ok(LoadedConfig { config: cfg, warnings })
}

fn float(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(Error::config(key, format!("expected a number, found {}", v.type_str()))),
    }
}

fn uint(key: &str, v: &Value) -> Result<u64> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        Value::Integer(i) => Err(Error::config(key, format!("expected a non-negative integer, found {i}"))),
        _ => Err(Error::config(key, format!("expected an integer, found {}", v.type_str()))),
    }
}

fn text<'v>(key: &str, v: &'v Value) -> Result<&'v str> {
    v.as_str()
        .ok_or_else(|| Error::config(key, format!("expected a string, found {}", v.type_str())))
}

fn parsed<T: FromStr<Err = Error>>(key: &str, v: &Value) -> Result<T> {
    text(key, v)?.parse().map_err(|e: Error| Error::config(key, e.to_string()))
}

fn apply_key(cfg: &mut ExperimentConfig, key: &str, v: &Value, warnings: &mut Vec<String>) -> Result<()> {
    match key {
        "mode" => cfg.mode = parsed(key, v)?,
        "S" => cfg.sparsity = float(key, v)?,
        "delta0" => cfg.delta0 = float(key, v)?,
        "dt_iters" => cfg.dt_iters = Some(uint(key, v)?),
        "dt_epochs" => cfg.dt_epochs = float(key, v)?,
        "t_max_fraction" => cfg.t_max_fraction = float(key, v)?,
        "scheduler" => cfg.scheduler = parsed(key, v)?,
        "init_scheme" => cfg.init_scheme = parsed(key, v)?,
        "sampling" => cfg.sampling = parsed(key, v)?,
        "widths" => {
            let arr = v
                .as_array()
                .ok_or_else(|| Error::config(key, "expected an array of layer widths"))?;
            cfg.widths = arr
                .iter()
                .map(|w| uint(key, w).map(|w| w as usize))
                .collect::<Result<_>>()?;
        }
        "bn_mode" => cfg.bn_mode = parsed(key, v)?,
        "lr" => cfg.lr = float(key, v)?,
        "momentum" => cfg.momentum = float(key, v)?,
        "warmup" => cfg.warmup = float(key, v)?,
        "label_smoothing" => cfg.label_smoothing = float(key, v)?,
        "batch_size" => cfg.batch_size = uint(key, v)? as usize,
        "epochs" => cfg.epochs = uint(key, v)?,
        "iterations" => cfg.iterations = Some(uint(key, v)?),
        "eval_every" => cfg.eval_every = Some(uint(key, v)?),
        "dataset" => cfg.dataset.kind = parsed(key, v)?,
        "n" => cfg.dataset.n = uint(key, v)? as usize,
        "classes" => cfg.dataset.classes = uint(key, v)? as usize,
        "noise" => cfg.dataset.noise = float(key, v)?,
        "data_seed" => cfg.dataset.seed = uint(key, v)?,
        "idx_images" => cfg.dataset.idx_images = Some(PathBuf::from(text(key, v)?)),
        "idx_labels" => cfg.dataset.idx_labels = Some(PathBuf::from(text(key, v)?)),
        "seed" => cfg.seed = uint(key, v)?,
        "out" => cfg.out = PathBuf::from(text(key, v)?),
        other => warnings.push(format!("unknown key `{other}` ignored")),
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |k: &str, m: String| Err(Error::config(k, m));
        if !(0.0..1.0).contains(&self.sparsity) {
            return err("S", format!("must be in [0, 1), got {}", self.sparsity));
        }
        if !(self.delta0 > 0.0 && self.delta0 <= 1.0) {
            return err("delta0", format!("must be in (0, 1], got {}", self.delta0));
        }
        if !(self.t_max_fraction > 0.0 && self.t_max_fraction <= 1.0) {
            return err("t_max_fraction", format!("must be in (0, 1], got {}", self.t_max_fraction));
        }
        if self.dt_iters == Some(0) {
            return err("dt_iters", "must be at least 1".into());
        }
        if !(self.dt_epochs > 0.0 && self.dt_epochs.is_finite()) {
            return err("dt_epochs", format!("must be positive, got {}", self.dt_epochs));
        }
        if self.widths.is_empty() || self.widths.contains(&0) {
            return err("widths", format!("need at least one positive width, got {:?}", self.widths));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return err("lr", format!("must be positive, got {}", self.lr));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return err("momentum", format!("must be in [0, 1), got {}", self.momentum));
        }
        if !(0.0..=1.0).contains(&self.warmup) {
            return err("warmup", format!("must be in [0, 1], got {}", self.warmup));
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return err("label_smoothing", format!("must be in [0, 1), got {}", self.label_smoothing));
        }
        let min_batch = if self.bn_mode == BnMode::Standardize { 2 } else { 1 };
        if self.batch_size < min_batch {
            return err("batch_size", format!("must be at least {min_batch}"));
        }
        if self.epochs == 0 {
            return err("epochs", "must be at least 1".into());
        }
        if self.iterations == Some(0) {
            return err("iterations", "must be at least 1".into());
        }
        if self.eval_every == Some(0) {
            return err("eval_every", "must be at least 1".into());
        }
        let d = &self.dataset;
        if d.kind != DatasetKind::Idx {
            if d.classes < 2 {
                return err("classes", format!("need at least 2 classes, got {}", d.classes));
            }
            if d.n < d.classes * 10 {
                return err("n", format!("need at least {} samples for {} classes", d.classes * 10, d.classes));
            }
            if !(d.noise >= 0.0 && d.noise.is_finite()) {
                return err("noise", format!("must be non-negative, got {}", d.noise));
            }
        } else if d.idx_images.is_none() || d.idx_labels.is_none() {
            let key = if d.idx_images.is_none() { "idx_images" } else { "idx_labels" };
            return err(key, "required when dataset = \"idx\"".into());
        }
        Ok(())
    }

    /// Iterations in one pass over a training split of `train_len` samples.
    pub fn toy_epoch(&self, train_len: usize) -> u64 {
        (train_len / self.batch_size.max(1)).max(1) as u64
    }

    /// Converts to iteration-level settings for a training split of
    /// `train_len` samples.
    pub fn resolve(&self, train_len: usize) -> Result<RunConfig> {
        self.validate()?;
        let epoch = self.toy_epoch(train_len);
        let iterations = self.iterations.unwrap_or(self.epochs * epoch);
        let dt = self
            .dt_iters
            .unwrap_or_else(|| ((self.dt_epochs * epoch as f64).round() as u64).max(1));
        let t_max = (self.t_max_fraction * iterations as f64).floor() as u64;
        let key = if self.dt_iters.is_some() { "dt_iters" } else { "dt_epochs" };
        if self.mode != RunMode::Plain && self.mode != RunMode::OneShotEarly && dt > t_max {
            return Err(Error::config(
                key,
                format!("exploration interval {dt} exceeds the exploration horizon {t_max} iterations"),
            ));
        }
        let run = RunConfig {
            mode: self.mode,
            train: TrainConfig {
                widths: self.widths.clone(),
                bn_mode: self.bn_mode,
                lr: self.lr,
                momentum: self.momentum,
                warmup_fraction: self.warmup,
                label_smoothing: self.label_smoothing,
                batch_size: self.batch_size,
                iterations,
                eval_every: self.eval_every.unwrap_or(epoch),
                seed: self.seed,
            },
            explore: ExplorationConfig {
                sparsity: self.sparsity,
                delta0: self.delta0,
                dt: dt.min(t_max.max(1)),
                t_max: t_max.max(1),
                scheduler: self.scheduler,
                init: self.init_scheme,
                sampling: self.sampling,
            },
        };
        run.validate().map_err(|e| Error::config("config", e.to_string()))?;
        Ok(run)
    }
}
