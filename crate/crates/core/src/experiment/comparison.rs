//! Gatekeeping comparison: hard, label smoothing at each alpha and soft
//! targets, trained over several model seeds and compared pairwise.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{tercile_stratified, MetricKind};
use crate::stats::{cohens_d, holm_bonferroni, mean, paired_ttest, Sidedness};
use crate::targets::TargetSpec;

use super::config::ExperimentConfig;
use super::run::{run_single, Prepared, RunOutput, RunResult};
use super::summary::{summarize, thread_pool, MeanSd, Metric};

/// Metrics on which soft training is tested against every other config.
pub const TESTED_METRICS: [Metric; 2] = [Metric::EntropyPearson, Metric::MeanKl];
pub const TERCILE_METRICS: [MetricKind; 3] = [MetricKind::Accuracy, MetricKind::MeanKl, MetricKind::MeanJsd];

pub fn comparison_configs(ls_alphas: &[f64]) -> Vec<(String, TargetSpec)> {
    let mut out = vec![("hard".to_string(), TargetSpec::hard())];
    for &a in ls_alphas {
        let t = TargetSpec::smoothed(a);
        out.push((t.label(), t));
    }
    out.push(("soft".to_string(), TargetSpec::soft()));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSummary {
    pub config_id: String,
    pub temperature_scaled: bool,
    pub n_seeds: usize,
    pub temperature: MeanSd,
    pub metrics: BTreeMap<Metric, MeanSd>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseTest {
    pub metric: Metric,
    /// Always `soft`.
    pub config_a: String,
    pub config_b: String,
    pub mean_diff: f64,
    pub t: f64,
    pub df: f64,
    pub p: f64,
    pub p_holm: f64,
    pub reject: bool,
    pub cohens_d: Option<f64>,
    pub sided: Sidedness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TercileRow {
    pub config_id: String,
    pub kind: MetricKind,
    /// Mean over model seeds, low/medium/high human entropy.
    pub values: [f64; 3],
    pub counts: [usize; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionRow {
    pub config_id: String,
    pub temperature_scaled: bool,
    pub rel: f64,
    pub res: f64,
    pub unc: f64,
    pub brier_soft: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub model_tag: String,
    pub runs: Vec<RunResult>,
    pub summaries: Vec<ConfigSummary>,
    pub tests: Vec<PairwiseTest>,
    pub terciles: Vec<TercileRow>,
    pub decomposition: Vec<DecompositionRow>,
    pub warnings: Vec<String>,
}

impl ComparisonReport {
    pub fn summary(&self, config_id: &str, scaled: bool) -> Option<&ConfigSummary> {
        self.summaries
            .iter()
            .find(|s| s.config_id == config_id && s.temperature_scaled == scaled)
    }
}

/// Train every config for every model seed, then aggregate.
pub fn run_comparison(prep: &Prepared, cfg: &ExperimentConfig) -> Result<(ComparisonReport, Vec<RunOutput>)> {
    cfg.validate()?;
    let configs = comparison_configs(&cfg.ls_alphas);
    let jobs: Vec<(&str, &TargetSpec, u64)> = configs
        .iter()
        .flat_map(|(id, t)| cfg.model_seeds.iter().map(move |&s| (id.as_str(), t, s)))
        .collect();
    let pool = thread_pool(cfg.workers)?;
    let outputs: Vec<RunOutput> = pool.install(|| {
        jobs.par_iter()
            .map(|&(id, t, s)| run_single(prep, id, t, s, &cfg.model, cfg.n_bins))
            .collect::<Result<Vec<_>>>()
    })?;
    let report = aggregate_comparison(&configs, &outputs, cfg)?;
    Ok((report, outputs))
}

/// Build the comparison tables from finished runs. Every (config, seed) pair
/// must be present.
pub fn aggregate_comparison(
    configs: &[(String, TargetSpec)],
    outputs: &[RunOutput],
    cfg: &ExperimentConfig,
) -> Result<ComparisonReport> {
    let mut by_key: BTreeMap<(&str, u64), &RunOutput> = BTreeMap::new();
    for o in outputs {
        by_key.insert((o.raw.config_id.as_str(), o.raw.model_seed), o);
    }
    let mut grouped: Vec<(&str, Vec<&RunOutput>)> = Vec::new();
    for (id, _) in configs {
        let runs = cfg
            .model_seeds
            .iter()
            .map(|&s| {
                by_key
                    .get(&(id.as_str(), s))
                    .copied()
                    .ok_or_else(|| Error::IncompleteExperiment(format!("no run for config {id}, model seed {s}")))
            })
            .collect::<Result<Vec<_>>>()?;
        grouped.push((id, runs));
    }

    let mut warnings = Vec::new();
    let mut summaries = Vec::new();
    let mut decomposition = Vec::new();
    let mut runs = Vec::new();
    for (id, outs) in &grouped {
        for scaled in [false, true] {
            let results: Vec<&RunResult> = outs.iter().map(|o| if scaled { &o.scaled } else { &o.raw }).collect();
            let temps: Vec<f64> = results.iter().map(|r| r.temperature).collect();
            summaries.push(ConfigSummary {
                config_id: id.to_string(),
                temperature_scaled: scaled,
                n_seeds: results.len(),
                temperature: MeanSd::of(&temps),
                metrics: summarize(results.iter().map(|r| &r.metrics)),
            });
            let decs: Vec<_> = results.iter().filter_map(|r| r.decomposition.as_ref()).collect();
            if !decs.is_empty() {
                let avg = |f: &dyn Fn(&crate::metrics::DecompositionReport) -> f64| {
                    mean(&decs.iter().map(|d| f(d)).collect::<Vec<_>>())
                };
                decomposition.push(DecompositionRow {
                    config_id: id.to_string(),
                    temperature_scaled: scaled,
                    rel: avg(&|d| d.rel),
                    res: avg(&|d| d.res),
                    unc: avg(&|d| d.unc),
                    brier_soft: avg(&|d| d.brier_soft),
                    residual: avg(&|d| d.residual),
                });
            }
            runs.extend(results.into_iter().cloned());
        }
    }

    let mut terciles = Vec::new();
    for (id, outs) in &grouped {
        for kind in TERCILE_METRICS {
            let reps = outs
                .iter()
                .map(|o| tercile_stratified(&o.raw_pairs, kind))
                .collect::<Result<Vec<_>>>()?;
            let mut values = [0.0; 3];
            for (t, v) in values.iter_mut().enumerate() {
                *v = mean(&reps.iter().map(|r| r.values[t]).collect::<Vec<_>>());
            }
            terciles.push(TercileRow {
                config_id: id.to_string(),
                kind,
                values,
                counts: reps[0].counts,
            });
        }
    }

    let tests = if cfg.model_seeds.len() < 2 {
        let w = "single model seed: standard deviations are 0 and pairwise tests are skipped".to_string();
        log::warn!("{w}");
        warnings.push(w);
        Vec::new()
    } else {
        pairwise_tests(&grouped, cfg.significance, &mut warnings)?
    };

    Ok(ComparisonReport {
        model_tag: cfg.model.tag(),
        runs,
        summaries,
        tests,
        terciles,
        decomposition,
        warnings,
    })
}

fn pairwise_tests(
    grouped: &[(&str, Vec<&RunOutput>)],
    alpha: f64,
    warnings: &mut Vec<String>,
) -> Result<Vec<PairwiseTest>> {
    let Some((_, soft)) = grouped.iter().find(|(id, _)| *id == "soft") else {
        return Ok(Vec::new());
    };
    let mut out = Vec::new();
    for metric in TESTED_METRICS {
        let x: Option<Vec<f64>> = soft.iter().map(|o| metric.get(&o.raw.metrics)).collect();
        let Some(x) = x else {
            warnings.push(format!("{}: undefined for soft, tests skipped", metric.name()));
            continue;
        };
        let mut family = Vec::new();
        for (id, outs) in grouped.iter().filter(|(id, _)| *id != "soft") {
            let y: Option<Vec<f64>> = outs.iter().map(|o| metric.get(&o.raw.metrics)).collect();
            let Some(y) = y else {
                warnings.push(format!("{}: undefined for {id}, test skipped", metric.name()));
                continue;
            };
            match paired_ttest(&x, &y, Sidedness::Two) {
                Ok(t) => family.push((id.to_string(), t, cohens_d(&x, &y).ok())),
                Err(Error::DegenerateDifferences) => {
                    warnings.push(format!("{}: soft vs {id} has constant differences, test skipped", metric.name()))
                }
                Err(e) => return Err(e),
            }
        }
        let pvals: Vec<f64> = family.iter().map(|(_, t, _)| t.p).collect();
        if pvals.is_empty() {
            continue;
        }
        let holm = holm_bonferroni(&pvals, alpha)?;
        for (i, (id, t, d)) in family.into_iter().enumerate() {
            out.push(PairwiseTest {
                metric,
                config_a: "soft".into(),
                config_b: id,
                mean_diff: t.mean_diff,
                t: t.t,
                df: t.df,
                p: t.p,
                p_holm: holm.adjusted[i],
                reject: holm.reject[i],
                cohens_d: d,
                sided: t.sided,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::config::{DataSource, ModelConfig};
    use crate::experiment::run::prepare_from_config;
    use crate::modelkit::SyntheticSpec;

    fn cfg(seeds: Vec<u64>) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(DataSource::Synthetic(SyntheticSpec {
            n_items: 240,
            n_features: 8,
            annotators_per_item: 20,
            ..Default::default()
        }));
        c.model_seeds = seeds;
        c.ls_alphas = vec![0.1, 0.3];
        c.model = ModelConfig {
            epochs: 4,
            ..Default::default()
        };
        c.workers = Some(2);
        c
    }

    #[test]
    fn config_list_matches_grid() {
        let ids: Vec<String> = comparison_configs(&[0.05, 0.5]).into_iter().map(|c| c.0).collect();
        assert_eq!(ids, vec!["hard", "ls0.05", "ls0.5", "soft"]);
    }

    #[test]
    fn unc_is_constant_across_configs() {
        let c = cfg(vec![1, 2]);
        let p = prepare_from_config(&c).unwrap();
        let (rep, _) = run_comparison(&p, &c).unwrap();
        let unc = rep.decomposition[0].unc;
        assert!(rep.decomposition.iter().all(|d| d.unc == unc));
        assert_eq!(rep.summaries.len(), 2 * 4);
        assert_eq!(rep.tests.len(), 2 * 3);
    }

    #[test]
    fn single_seed_skips_tests() {
        let c = cfg(vec![7]);
        let p = prepare_from_config(&c).unwrap();
        let (rep, _) = run_comparison(&p, &c).unwrap();
        assert!(rep.tests.is_empty());
        assert!(!rep.warnings.is_empty());
        assert!(rep.summaries.iter().all(|s| s.metrics[&Metric::MeanKl].sd == 0.0));
    }

    #[test]
    fn missing_run_is_incomplete() {
        let c = cfg(vec![1, 2]);
        let p = prepare_from_config(&c).unwrap();
        let (_, mut outs) = run_comparison(&p, &c).unwrap();
        outs.pop();
        let r = aggregate_comparison(&comparison_configs(&c.ls_alphas), &outs, &c);
        assert!(matches!(r, Err(Error::IncompleteExperiment(_))));
    }
}
