//! Aggregation helpers shared by the runners.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::MetricReport;
use crate::stats::{mean, sample_sd};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Accuracy,
    Ece,
    BrierSoft,
    DistEce,
    MeanKl,
    EntropyPearson,
    EntropySpearman,
}

impl Metric {
    pub const ALL: [Metric; 7] = [
        Metric::Accuracy,
        Metric::Ece,
        Metric::BrierSoft,
        Metric::DistEce,
        Metric::MeanKl,
        Metric::EntropyPearson,
        Metric::EntropySpearman,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::Ece => "ece",
            Metric::BrierSoft => "brier_soft",
            Metric::DistEce => "dist_ece",
            Metric::MeanKl => "mean_kl",
            Metric::EntropyPearson => "entropy_pearson",
            Metric::EntropySpearman => "entropy_spearman",
        }
    }

    pub fn lower_is_better(self) -> bool {
        matches!(self, Metric::Ece | Metric::BrierSoft | Metric::DistEce | Metric::MeanKl)
    }

    /// `None` for correlations that were undefined on this run.
    pub fn get(self, r: &MetricReport) -> Option<f64> {
        match self {
            Metric::Accuracy => Some(r.accuracy),
            Metric::Ece => Some(r.ece),
            Metric::BrierSoft => Some(r.brier_soft),
            Metric::DistEce => Some(r.dist_ece),
            Metric::MeanKl => Some(r.mean_kl),
            Metric::EntropyPearson => r.entropy_pearson,
            Metric::EntropySpearman => r.entropy_spearman,
        }
    }

    pub fn require(self, r: &MetricReport) -> Result<f64> {
        self.get(r).ok_or(Error::DegenerateVariance(self.name()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single observation.
    pub sd: f64,
    pub n: usize,
}

impl MeanSd {
    pub fn of(x: &[f64]) -> Self {
        Self {
            mean: mean(x),
            sd: if x.len() < 2 { 0.0 } else { sample_sd(x) },
            n: x.len(),
        }
    }
}

/// Mean and sd of every metric over `reports`; metrics undefined on any run are omitted.
pub fn summarize<'a>(reports: impl IntoIterator<Item = &'a MetricReport> + Clone) -> BTreeMap<Metric, MeanSd> {
    let mut out = BTreeMap::new();
    for m in Metric::ALL {
        let vals: Option<Vec<f64>> = reports.clone().into_iter().map(|r| m.get(r)).collect();
        if let Some(v) = vals.filter(|v| !v.is_empty()) {
            out.insert(m, MeanSd::of(&v));
        }
    }
    out
}

pub fn thread_pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::config(format!("cannot start worker pool: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(kl: f64, r: Option<f64>) -> MetricReport {
        MetricReport {
            accuracy: 0.5,
            ece: 0.1,
            brier_soft: 0.2,
            dist_ece: 0.1,
            mean_kl: kl,
            entropy_pearson: r,
            entropy_spearman: r,
            n_items: 10,
            n_bins: 10,
        }
    }

    #[test]
    fn single_run_has_zero_sd() {
        let s = summarize(&[report(0.3, Some(0.5))]);
        assert_eq!(s[&Metric::MeanKl], MeanSd { mean: 0.3, sd: 0.0, n: 1 });
    }

    #[test]
    fn undefined_correlation_is_dropped() {
        let rs = [report(0.3, Some(0.5)), report(0.5, None)];
        let s = summarize(&rs);
        assert!(!s.contains_key(&Metric::EntropyPearson));
        assert!((s[&Metric::MeanKl].mean - 0.4).abs() < 1e-15);
    }
}
