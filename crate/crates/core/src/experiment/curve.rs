//! Annotation-efficiency curve and Dirichlet-smoothing sweep.
//!
//! Only training labels are subsampled; validation targets and the test
//! reference always use the full annotation counts.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::correlation;
use crate::metrics::CorrelationMethod;
use crate::stats::{holm_bonferroni, mean, paired_ttest, pct_improvement, Sidedness, TTest};
use crate::targets::TargetSpec;

use super::config::ExperimentConfig;
use super::run::{run_single, Prepared, RunResult};
use super::summary::{summarize, thread_pool, MeanSd, Metric};

/// Metrics whose %-of-improvement is reported on the curve.
pub const CURVE_METRICS: [Metric; 5] = [
    Metric::MeanKl,
    Metric::BrierSoft,
    Metric::DistEce,
    Metric::EntropyPearson,
    Metric::EntropySpearman,
];

#[derive(Debug, Clone)]
struct Job {
    config_id: String,
    target: TargetSpec,
    model_seed: u64,
}

fn run_jobs(prep: &Prepared, cfg: &ExperimentConfig, jobs: &[Job]) -> Result<Vec<RunResult>> {
    let pool = thread_pool(cfg.workers)?;
    pool.install(|| {
        jobs.par_iter()
            .map(|j| run_single(prep, &j.config_id, &j.target, j.model_seed, &cfg.model, cfg.n_bins).map(|o| o.raw))
            .collect()
    })
}

fn check_grid(prep: &Prepared, grid: &[u64]) -> Result<()> {
    let available = prep.train.min_annotators();
    match grid.iter().find(|&&n| n > available) {
        Some(&n) => Err(Error::InsufficientAnnotators {
            requested: n,
            available,
        }),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub n: u64,
    pub metrics: BTreeMap<Metric, MeanSd>,
    /// %-of-improvement from the means over all runs at this N.
    pub pct_of_means: BTreeMap<Metric, f64>,
    /// %-of-improvement per model seed (subsample seeds averaged first), then mean ± sd.
    pub pct_by_seed: BTreeMap<Metric, MeanSd>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapTest {
    pub n: u64,
    /// Seed-level %KL minus %entropy-r.
    pub gap: MeanSd,
    pub one_sided: Option<TTest>,
    pub two_sided: Option<TTest>,
    /// Holm adjustment of the one-sided p-values across the N grid.
    pub p_holm_one_sided: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveReport {
    pub model_tag: String,
    pub hard: BTreeMap<Metric, MeanSd>,
    pub full: BTreeMap<Metric, MeanSd>,
    pub points: Vec<CurvePoint>,
    pub gap_tests: Vec<GapTest>,
    /// Spearman correlation between N and mean %KL over the grid.
    pub kl_trend_spearman: Option<f64>,
    pub runs: Vec<RunResult>,
    pub warnings: Vec<String>,
}

impl CurveReport {
    pub fn point(&self, n: u64) -> Option<&CurvePoint> {
        self.points.iter().find(|p| p.n == n)
    }

    pub fn gap(&self, n: u64) -> Option<&GapTest> {
        self.gap_tests.iter().find(|g| g.n == n)
    }
}

pub fn run_efficiency_curve(prep: &Prepared, cfg: &ExperimentConfig) -> Result<CurveReport> {
    cfg.validate()?;
    check_grid(prep, &cfg.n_grid)?;
    if cfg.subsample_seeds.is_empty() {
        return Err(Error::config("subsample_seeds must not be empty"));
    }
    let mut jobs = Vec::new();
    for &s in &cfg.model_seeds {
        jobs.push(Job {
            config_id: "hard".into(),
            target: TargetSpec::hard(),
            model_seed: s,
        });
        jobs.push(Job {
            config_id: "soft".into(),
            target: TargetSpec::soft(),
            model_seed: s,
        });
        for &n in &cfg.n_grid {
            for &ss in &cfg.subsample_seeds {
                let t = TargetSpec::soft().subsampled(n, ss);
                jobs.push(Job {
                    config_id: t.label(),
                    target: t,
                    model_seed: s,
                });
            }
        }
    }
    let runs = run_jobs(prep, cfg, &jobs)?;
    aggregate_curve(runs, cfg)
}

fn seed_level(runs: &[RunResult], cfg: &ExperimentConfig, n: Option<u64>, id: &str, metric: Metric) -> Result<Vec<f64>> {
    cfg.model_seeds
        .iter()
        .map(|&s| {
            let vals = runs
                .iter()
                .filter(|r| r.model_seed == s && r.n_annotators == n && r.config_id == id)
                .map(|r| metric.require(&r.metrics))
                .collect::<Result<Vec<_>>>()?;
            if vals.is_empty() {
                return Err(Error::IncompleteExperiment(format!("no {id} run for model seed {s}")));
            }
            Ok(mean(&vals))
        })
        .collect()
}

pub fn aggregate_curve(mut runs: Vec<RunResult>, cfg: &ExperimentConfig) -> Result<CurveReport> {
    runs.sort_by(|a, b| {
        (a.n_annotators, &a.config_id, a.model_seed, a.subsample_seed).cmp(&(
            b.n_annotators,
            &b.config_id,
            b.model_seed,
            b.subsample_seed,
        ))
    });
    let mut warnings = Vec::new();
    let pick = |id: &str, n: Option<u64>| -> Vec<&RunResult> {
        runs.iter().filter(|r| r.config_id == id && r.n_annotators == n).collect()
    };
    let hard = summarize(pick("hard", None).into_iter().map(|r| &r.metrics));
    let full = summarize(pick("soft", None).into_iter().map(|r| &r.metrics));

    let mut points = Vec::new();
    let mut gaps = Vec::new();
    for &n in &cfg.n_grid {
        let id = TargetSpec::soft().subsampled(n, 0).label();
        let at_n = pick(&id, Some(n));
        if at_n.is_empty() {
            return Err(Error::IncompleteExperiment(format!("no runs at N={n}")));
        }
        let metrics = summarize(at_n.iter().map(|r| &r.metrics));
        let mut pct_of_means = BTreeMap::new();
        let mut pct_by_seed = BTreeMap::new();
        let mut seed_pcts: BTreeMap<Metric, Vec<f64>> = BTreeMap::new();
        for m in CURVE_METRICS {
            if let (Some(h), Some(a), Some(f)) = (hard.get(&m), metrics.get(&m), full.get(&m)) {
                match pct_improvement(h.mean, a.mean, f.mean) {
                    Ok(p) => {
                        pct_of_means.insert(m, p);
                    }
                    Err(Error::ZeroRange) => warnings.push(format!("{}: hard and full coincide", m.name())),
                    Err(e) => return Err(e),
                }
            }
            let per_seed = (|| -> Result<Vec<f64>> {
                let h = seed_level(&runs, cfg, None, "hard", m)?;
                let a = seed_level(&runs, cfg, Some(n), &id, m)?;
                let f = seed_level(&runs, cfg, None, "soft", m)?;
                h.iter().zip(&a).zip(&f).map(|((h, a), f)| pct_improvement(*h, *a, *f)).collect()
            })();
            match per_seed {
                Ok(v) => {
                    pct_by_seed.insert(m, MeanSd::of(&v));
                    seed_pcts.insert(m, v);
                }
                Err(Error::DegenerateVariance(_)) | Err(Error::ZeroRange) => {
                    warnings.push(format!("N={n}: per-seed %{} undefined", m.name()))
                }
                Err(e) => return Err(e),
            }
        }
        if let (Some(kl), Some(r)) = (seed_pcts.get(&Metric::MeanKl), seed_pcts.get(&Metric::EntropyPearson)) {
            let diff: Vec<f64> = kl.iter().zip(r).map(|(a, b)| a - b).collect();
            let test = |sided| match paired_ttest(kl, r, sided) {
                Ok(t) => Ok(Some(t)),
                Err(Error::DegenerateDifferences) | Err(Error::Config(_)) => Ok(None),
                Err(e) => Err(e),
            };
            gaps.push(GapTest {
                n,
                gap: MeanSd::of(&diff),
                one_sided: test(Sidedness::One)?,
                two_sided: test(Sidedness::Two)?,
                p_holm_one_sided: None,
            });
        }
        points.push(CurvePoint {
            n,
            metrics,
            pct_of_means,
            pct_by_seed,
        });
    }

    let tested: Vec<usize> = (0..gaps.len()).filter(|&i| gaps[i].one_sided.is_some()).collect();
    if !tested.is_empty() {
        let p: Vec<f64> = tested.iter().map(|&i| gaps[i].one_sided.as_ref().unwrap().p).collect();
        let holm = holm_bonferroni(&p, cfg.significance)?;
        for (j, &i) in tested.iter().enumerate() {
            gaps[i].p_holm_one_sided = Some(holm.adjusted[j]);
        }
    }

    let trend: Vec<(f64, f64)> = points
        .iter()
        .filter_map(|p| p.pct_of_means.get(&Metric::MeanKl).map(|v| (p.n as f64, *v)))
        .collect();
    let kl_trend_spearman = if trend.len() >= 3 {
        let (x, y): (Vec<f64>, Vec<f64>) = trend.into_iter().unzip();
        correlation(&x, &y, CorrelationMethod::Spearman).ok()
    } else {
        None
    };

    Ok(CurveReport {
        model_tag: cfg.model.tag(),
        hard,
        full,
        points,
        gap_tests: gaps,
        kl_trend_spearman,
        runs,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: u64,
    /// `raw` or `dir<alpha>`.
    pub target: String,
    pub alpha: Option<f64>,
    pub metrics: BTreeMap<Metric, MeanSd>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub model_tag: String,
    pub alphas: Vec<f64>,
    pub rows: Vec<SweepRow>,
    pub runs: Vec<RunResult>,
}

impl SweepReport {
    pub fn row(&self, n: u64, alpha: Option<f64>) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.n == n && r.alpha == alpha)
    }
}

/// Raw subsampled soft labels against Dirichlet-smoothed ones at each alpha.
pub fn run_dirichlet_sweep(prep: &Prepared, cfg: &ExperimentConfig) -> Result<SweepReport> {
    cfg.validate()?;
    check_grid(prep, &cfg.n_grid)?;
    let alphas = cfg.dirichlet_alphas(prep.k());
    let mut jobs = Vec::new();
    for &n in &cfg.n_grid {
        for &s in &cfg.model_seeds {
            for &ss in &cfg.subsample_seeds {
                let raw = TargetSpec::soft().subsampled(n, ss);
                jobs.push(Job {
                    config_id: format!("raw@N{n}"),
                    target: raw,
                    model_seed: s,
                });
                for &a in &alphas {
                    let t = TargetSpec::dirichlet(a).subsampled(n, ss);
                    jobs.push(Job {
                        config_id: t.label(),
                        target: t,
                        model_seed: s,
                    });
                }
            }
        }
    }
    let runs = run_jobs(prep, cfg, &jobs)?;
    let mut rows = Vec::new();
    for &n in &cfg.n_grid {
        let mut variants: Vec<(String, Option<f64>)> = vec![("raw".into(), None)];
        variants.extend(alphas.iter().map(|&a| (TargetSpec::dirichlet(a).label(), Some(a))));
        for (name, alpha) in variants {
            let sel: Vec<&RunResult> = runs
                .iter()
                .filter(|r| r.n_annotators == Some(n))
                .filter(|r| match alpha {
                    None => r.config_id.starts_with("raw@"),
                    Some(a) => r.target_spec.alpha == a && r.config_id.starts_with("dir"),
                })
                .collect();
            rows.push(SweepRow {
                n,
                target: name,
                alpha,
                metrics: summarize(sel.into_iter().map(|r| &r.metrics)),
            });
        }
    }
    Ok(SweepReport {
        model_tag: cfg.model.tag(),
        alphas,
        rows,
        runs,
    })
}
