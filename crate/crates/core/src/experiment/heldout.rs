//! Held-out annotator evaluation: each item's pool is split into a training
//! draw and a disjoint evaluation draw, so test metrics are computed against
//! annotators the targets never saw.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::mean;
use crate::targets::{item_seed, split_annotator_pool};

use super::comparison::{comparison_configs, run_comparison, ComparisonReport};
use super::config::ExperimentConfig;
use super::run::{Block, Prepared};
use super::summary::{MeanSd, Metric};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeldOutSummary {
    pub config_id: String,
    pub temperature_scaled: bool,
    /// Per model seed, averaged over split seeds first.
    pub metrics: BTreeMap<Metric, MeanSd>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeldOutReport {
    pub n_train: u64,
    pub n_eval: u64,
    pub splits: Vec<(u64, ComparisonReport)>,
    pub summaries: Vec<HeldOutSummary>,
}

impl HeldOutReport {
    pub fn summary(&self, config_id: &str, scaled: bool) -> Option<&HeldOutSummary> {
        self.summaries
            .iter()
            .find(|s| s.config_id == config_id && s.temperature_scaled == scaled)
    }
}

fn split_block(block: &Block, n_train: u64, n_eval: u64, seed: u64, keep_eval: bool) -> Result<Block> {
    let counts = block
        .counts
        .iter()
        .zip(&block.index)
        .map(|(c, &i)| {
            let (tr, ev) = split_annotator_pool(c, n_train, n_eval, item_seed(seed, i))?;
            Ok(if keep_eval { ev } else { tr })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Block {
        counts,
        ..block.clone()
    })
}

/// Rebuild `prep` so training and validation see `n_train` annotators per item
/// and the test split is scored against a disjoint draw of `n_eval`.
pub fn held_out_view(prep: &Prepared, n_train: u64, n_eval: u64, seed: u64) -> Result<Prepared> {
    Ok(Prepared {
        train: split_block(&prep.train, n_train, n_eval, seed, false)?,
        val: split_block(&prep.val, n_train, n_eval, seed, false)?,
        test: split_block(&prep.test, n_train, n_eval, seed, true)?,
        ..prep.clone()
    })
}

/// Gatekeeping comparison repeated for every split seed in `cfg.subsample_seeds`.
pub fn run_held_out(prep: &Prepared, cfg: &ExperimentConfig, n_train: u64, n_eval: u64) -> Result<HeldOutReport> {
    cfg.validate()?;
    if cfg.subsample_seeds.is_empty() {
        return Err(Error::config("subsample_seeds must not be empty"));
    }
    let mut splits = Vec::new();
    for &s in &cfg.subsample_seeds {
        let view = held_out_view(prep, n_train, n_eval, s)?;
        let (rep, _) = run_comparison(&view, cfg)?;
        splits.push((s, rep));
    }

    let mut summaries = Vec::new();
    for (id, _) in comparison_configs(&cfg.ls_alphas) {
        for scaled in [false, true] {
            let mut metrics = BTreeMap::new();
            for m in Metric::ALL {
                let per_seed: Option<Vec<f64>> = cfg
                    .model_seeds
                    .iter()
                    .map(|&ms| {
                        let v: Option<Vec<f64>> = splits
                            .iter()
                            .flat_map(|(_, r)| &r.runs)
                            .filter(|r| r.config_id == id && r.model_seed == ms && r.temperature_scaled == scaled)
                            .map(|r| m.get(&r.metrics))
                            .collect();
                        v.map(|v| mean(&v))
                    })
                    .collect();
                if let Some(v) = per_seed {
                    metrics.insert(m, MeanSd::of(&v));
                }
            }
            summaries.push(HeldOutSummary {
                config_id: id.clone(),
                temperature_scaled: scaled,
                metrics,
            });
        }
    }
    Ok(HeldOutReport {
        n_train,
        n_eval,
        splits,
        summaries,
    })
}
