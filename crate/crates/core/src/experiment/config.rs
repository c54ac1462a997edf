//! Experiment configuration, a single JSON document.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{FieldMap, LongCsvSchema};
use crate::metrics::DEFAULT_BINS;
use crate::modelkit::{RaterPoolSpec, SyntheticSpec, TrainConfig};
use crate::targets::{DEFAULT_SUBSAMPLE_SEEDS, LS_ALPHA_GRID};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    /// Counts JSONL plus a features CSV sidecar.
    Files {
        counts: PathBuf,
        features: PathBuf,
        #[serde(default)]
        fields: Option<FieldMap>,
    },
    Synthetic(SyntheticSpec),
}

/// Long-format annotations for the Dawid-Skene comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RaterSource {
    Csv { path: PathBuf, schema: LongCsvSchema },
    Synthetic { items: SyntheticSpec, pool: RaterPoolSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub seed: u64,
    pub ratios: [f64; 3],
    /// Reuse a saved split instead of computing one.
    pub path: Option<PathBuf>,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            ratios: [0.7, 0.15, 0.15],
            path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Width of the tanh hidden layer; linear softmax when absent.
    pub hidden: Option<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    /// Linear model only: weights start at N(0, init_scale^2/D) drawn from
    /// the model seed. Zero keeps the all-zero start.
    #[serde(default)]
    pub init_scale: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            hidden: None,
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            weight_decay: t.weight_decay,
            init_scale: 0.0,
        }
    }
}

impl ModelConfig {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            seed,
        }
    }

    /// Short tag stamped on every report.
    pub fn tag(&self) -> String {
        match self.hidden {
            Some(h) => format!("model=mlp-tanh{h}-softmax"),
            None => "model=linear-softmax".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub data: DataSource,
    #[serde(default)]
    pub raters: Option<RaterSource>,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default = "default_model_seeds")]
    pub model_seeds: Vec<u64>,
    #[serde(default = "default_subsample_seeds")]
    pub subsample_seeds: Vec<u64>,
    #[serde(default = "default_n_grid")]
    pub n_grid: Vec<u64>,
    #[serde(default = "default_ls_alphas")]
    pub ls_alphas: Vec<f64>,
    /// Defaults to `1/K, 0.5, 1.0`.
    #[serde(default)]
    pub dirichlet_alphas: Option<Vec<f64>>,
    #[serde(default = "default_bins")]
    pub n_bins: usize,
    #[serde(default = "default_alpha")]
    pub significance: f64,
    /// Worker threads; defaults to the available parallelism.
    #[serde(default)]
    pub workers: Option<usize>,
}

fn default_name() -> String {
    "experiment".into()
}
fn default_model_seeds() -> Vec<u64> {
    vec![42, 43, 44, 45, 46]
}
fn default_subsample_seeds() -> Vec<u64> {
    DEFAULT_SUBSAMPLE_SEEDS.to_vec()
}
fn default_n_grid() -> Vec<u64> {
    vec![3, 5, 10, 20, 50, 100]
}
fn default_ls_alphas() -> Vec<f64> {
    LS_ALPHA_GRID.to_vec()
}
fn default_bins() -> usize {
    DEFAULT_BINS
}
fn default_alpha() -> f64 {
    0.05
}

impl ExperimentConfig {
    pub fn new(data: DataSource) -> Self {
        Self {
            name: default_name(),
            data,
            raters: None,
            split: SplitConfig::default(),
            model: ModelConfig::default(),
            model_seeds: default_model_seeds(),
            subsample_seeds: default_subsample_seeds(),
            n_grid: default_n_grid(),
            ls_alphas: default_ls_alphas(),
            dirichlet_alphas: None,
            n_bins: default_bins(),
            significance: default_alpha(),
            workers: None,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.model_seeds.is_empty() {
            return Err(Error::config("model_seeds must not be empty"));
        }
        if self.n_bins == 0 {
            return Err(Error::config("n_bins must be >= 1"));
        }
        if self.n_grid.contains(&0) {
            return Err(Error::config("n_grid entries must be >= 1"));
        }
        if !(self.significance > 0.0 && self.significance < 1.0) {
            return Err(Error::config("significance must lie in (0, 1)"));
        }
        if self.ls_alphas.iter().any(|a| !(0.0..1.0).contains(a)) {
            return Err(Error::config("ls_alphas must lie in [0, 1)"));
        }
        if let Some(a) = &self.dirichlet_alphas {
            if a.iter().any(|a| !(*a > 0.0)) {
                return Err(Error::config("dirichlet_alphas must be positive"));
            }
        }
        if self.workers == Some(0) {
            return Err(Error::config("workers must be >= 1"));
        }
        if !(self.model.init_scale >= 0.0 && self.model.init_scale.is_finite()) {
            return Err(Error::config("init_scale must be finite and >= 0"));
        }
        self.model.train_config(0).validate()
    }

    pub fn dirichlet_alphas(&self, k: usize) -> Vec<f64> {
        self.dirichlet_alphas.clone().unwrap_or_else(|| vec![1.0 / k as f64, 0.5, 1.0])
    }
}
