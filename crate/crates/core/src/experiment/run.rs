//! Data preparation and the single training run every runner is built from.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{
    load_features, parse_counts_jsonl, stratified_split, Dataset, FeatureTable, PredictionRow,
    PredictionSet, SplitAssignment,
};
use crate::metrics::{evaluate, murphy_decomposition, DecompositionReport, MetricReport};
use crate::modelkit::{
    apply_temperature, fit_temperature, generate_synthetic, train, ClassifierModel, EpochRecord,
    TemperatureObjective,
};
use crate::simplex::{normalize_counts, softmax, AnnotationCounts, EvalPair, LabelDistribution};
use crate::targets::{plurality_label, TargetMode, TargetSpec};

use super::config::{DataSource, ExperimentConfig, ModelConfig};

pub fn load_data(source: &DataSource) -> Result<(Dataset, FeatureTable)> {
    match source {
        DataSource::Files {
            counts,
            features,
            fields,
        } => {
            let fields = fields.clone().unwrap_or_default();
            Ok((parse_counts_jsonl(counts, &fields)?, load_features(features)?))
        }
        DataSource::Synthetic(spec) => {
            let data = generate_synthetic(spec)?;
            Ok((data.dataset, data.features))
        }
    }
}

/// Features, counts and dataset positions for one split, in id order.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub ids: Vec<String>,
    pub x: Vec<Vec<f64>>,
    pub counts: Vec<AnnotationCounts>,
    /// Position of each item in the full dataset; keys the per-item subsample stream.
    pub index: Vec<u64>,
}

impl Block {
    fn new(dataset: &Dataset, features: &FeatureTable, ids: &[String]) -> Result<Self> {
        let pos: std::collections::HashMap<&str, usize> = dataset
            .items
            .iter()
            .enumerate()
            .map(|(i, it)| (it.item_id.as_str(), i))
            .collect();
        let mut counts = Vec::with_capacity(ids.len());
        let mut index = Vec::with_capacity(ids.len());
        for id in ids {
            let &i = pos
                .get(id.as_str())
                .ok_or_else(|| Error::Data(format!("split references unknown item {id}")))?;
            counts.push(dataset.items[i].counts.clone());
            index.push(i as u64);
        }
        Ok(Self {
            ids: ids.to_vec(),
            x: features.matrix(ids)?,
            counts,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn targets(&self, spec: &TargetSpec) -> Result<Vec<LabelDistribution>> {
        self.counts.iter().zip(&self.index).map(|(c, &i)| spec.build(c, i)).collect()
    }

    /// Empirical distribution of the full annotation counts.
    pub fn human(&self) -> Vec<LabelDistribution> {
        self.counts.iter().map(normalize_counts).collect()
    }

    pub fn min_annotators(&self) -> u64 {
        self.counts.iter().map(AnnotationCounts::total).min().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub class_names: Vec<String>,
    pub n_features: usize,
    pub split: SplitAssignment,
    pub train: Block,
    pub val: Block,
    pub test: Block,
}

impl Prepared {
    pub fn k(&self) -> usize {
        self.class_names.len()
    }
}

pub fn prepare(dataset: &Dataset, features: &FeatureTable, split: SplitAssignment) -> Result<Prepared> {
    let train = Block::new(dataset, features, &split.train)?;
    let val = Block::new(dataset, features, &split.val)?;
    let test = Block::new(dataset, features, &split.test)?;
    if train.is_empty() || val.is_empty() || test.is_empty() {
        return Err(Error::Data(format!(
            "every split must be non-empty, got {:?}",
            (train.len(), val.len(), test.len())
        )));
    }
    Ok(Prepared {
        class_names: dataset.class_names.clone(),
        n_features: features.dim,
        split,
        train,
        val,
        test,
    })
}

pub fn prepare_from_config(cfg: &ExperimentConfig) -> Result<Prepared> {
    let (dataset, features) = load_data(&cfg.data)?;
    let split = match &cfg.split.path {
        Some(p) => SplitAssignment::load(p)?,
        None => stratified_split(&dataset, cfg.split.ratios, cfg.split.seed)?,
    };
    prepare(&dataset, &features, split)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub config_id: String,
    pub target_spec: TargetSpec,
    pub model_seed: u64,
    pub subsample_seed: Option<u64>,
    pub n_annotators: Option<u64>,
    pub temperature_scaled: bool,
    pub temperature: f64,
    pub best_epoch: usize,
    pub metrics: MetricReport,
    pub decomposition: Option<DecompositionReport>,
}

/// Outcome of one training run, evaluated with and without temperature scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub raw: RunResult,
    pub scaled: RunResult,
    pub raw_pairs: Vec<EvalPair>,
    pub scaled_pairs: Vec<EvalPair>,
    pub trace: Vec<EpochRecord>,
    pub model: ClassifierModel,
}

impl RunOutput {
    pub fn predictions(&self, scaled: bool) -> PredictionSet {
        let pairs = if scaled { &self.scaled_pairs } else { &self.raw_pairs };
        PredictionSet {
            rows: pairs
                .iter()
                .map(|p| PredictionRow {
                    item_id: p.item_id.clone(),
                    probs: p.predicted.clone(),
                    logits: p.logits.clone(),
                })
                .collect(),
        }
    }
}

pub fn init_model(n_features: usize, k: usize, model: &ModelConfig, seed: u64) -> ClassifierModel {
    match model.hidden {
        Some(h) => ClassifierModel::with_hidden(n_features, h, k, seed),
        None if model.init_scale > 0.0 => ClassifierModel::linear_random(n_features, k, model.init_scale, seed),
        None => ClassifierModel::linear(n_features, k),
    }
}

/// Validation targets use the same family as training but always the full counts.
pub fn validation_spec(target: &TargetSpec) -> TargetSpec {
    TargetSpec {
        subsample_n: None,
        subsample_seed: None,
        ..target.clone()
    }
}

pub fn temperature_objective(target: &TargetSpec) -> TemperatureObjective {
    match target.mode {
        TargetMode::Hard => TemperatureObjective::NllHard,
        _ => TemperatureObjective::KlSoft,
    }
}

/// Build evaluation pairs for `block` from per-item logits.
pub fn eval_pairs(block: &Block, logits: &[Vec<f64>], temperature: f64) -> Result<Vec<EvalPair>> {
    block
        .ids
        .iter()
        .zip(block.human())
        .zip(logits)
        .map(|((id, human), z)| {
            let predicted = if temperature == 1.0 {
                LabelDistribution::new(softmax(z))?
            } else {
                apply_temperature(z, temperature)?
            };
            EvalPair::new(id.clone(), human, predicted)?.with_logits(z.clone())
        })
        .collect()
}

pub fn score(block: &Block, pairs: &[EvalPair], n_bins: usize) -> Result<(MetricReport, DecompositionReport)> {
    let plurality: Vec<usize> = block.counts.iter().map(plurality_label).collect();
    Ok((evaluate(pairs, &plurality, n_bins)?, murphy_decomposition(pairs, n_bins)?))
}

pub fn run_single(
    prep: &Prepared,
    config_id: &str,
    target: &TargetSpec,
    model_seed: u64,
    model: &ModelConfig,
    n_bins: usize,
) -> Result<RunOutput> {
    target.validate()?;
    let train_t = prep.train.targets(target)?;
    let val_spec = validation_spec(target);
    let val_t = prep.val.targets(&val_spec)?;
    let init = init_model(prep.n_features, prep.k(), model, model_seed);
    let outcome = train(
        &init,
        &prep.train.x,
        &train_t,
        &prep.val.x,
        &val_t,
        &model.train_config(model_seed),
    )?;
    let m = &outcome.model;

    let val_logits = prep.val.x.iter().map(|x| m.logits(x)).collect::<Result<Vec<_>>>()?;
    let temperature = match fit_temperature(&val_logits, &val_t, temperature_objective(target)) {
        Ok(t) => t,
        Err(Error::DegenerateLogits) => {
            log::warn!("{config_id} seed {model_seed}: constant validation logits, temperature left at 1");
            1.0
        }
        Err(e) => return Err(e),
    };

    let test_logits = prep.test.x.iter().map(|x| m.logits(x)).collect::<Result<Vec<_>>>()?;
    let raw_pairs = eval_pairs(&prep.test, &test_logits, 1.0)?;
    let scaled_pairs = eval_pairs(&prep.test, &test_logits, temperature)?;
    let (raw_metrics, raw_dec) = score(&prep.test, &raw_pairs, n_bins)?;
    let (ts_metrics, ts_dec) = score(&prep.test, &scaled_pairs, n_bins)?;

    let base = RunResult {
        config_id: config_id.to_string(),
        target_spec: target.clone(),
        model_seed,
        subsample_seed: target.subsample_seed,
        n_annotators: target.subsample_n,
        temperature_scaled: false,
        temperature: 1.0,
        best_epoch: outcome.best_epoch,
        metrics: raw_metrics,
        decomposition: Some(raw_dec),
    };
    let scaled = RunResult {
        temperature_scaled: true,
        temperature,
        metrics: ts_metrics,
        decomposition: Some(ts_dec),
        ..base.clone()
    };
    Ok(RunOutput {
        raw: base,
        scaled,
        raw_pairs,
        scaled_pairs,
        trace: outcome.trace,
        model: outcome.model,
    })
}
