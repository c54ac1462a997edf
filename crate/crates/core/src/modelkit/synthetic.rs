//! Synthetic datasets with item-specific ambiguity.
//!
//! Each item gets a stratum (low, mid or high ambiguity), a nominal class and
//! a true label distribution drawn from a Dirichlet whose concentration
//! depends on the stratum. Features mix a class direction, a projection of the
//! centered log-ratio of the true distribution (which carries the ambiguity)
//! and Gaussian noise. Annotations are multinomial draws from the true
//! distribution.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{AnnotationMatrix, AnnotationRecord, Dataset, FeatureTable, Item};
use crate::rng::SplitMix64;
use crate::simplex::{AnnotationCounts, LabelDistribution};

/// `(base, peak)` Dirichlet parameters per stratum: `base` on every class plus
/// `peak` on the nominal class.
pub const STRATUM_CONCENTRATION: [(f64, f64); 3] = [(0.05, 30.0), (4.0, 16.0), (10.0, 5.0)];

/// Floor applied before taking logs for the feature construction.
const CLR_FLOOR: f64 = 1e-3;

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_items: usize,
    pub n_features: usize,
    pub k: usize,
    /// Mixture weights over the low, mid and high ambiguity strata.
    pub entropy_profile: [f64; 3],
    pub annotators_per_item: u64,
    pub noise_scale: f64,
    pub seed: u64,
    #[serde(default = "one")]
    pub class_signal: f64,
    #[serde(default = "one")]
    pub ambiguity_signal: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_items: 2000,
            n_features: 32,
            k: 3,
            entropy_profile: [1.0 / 3.0; 3],
            annotators_per_item: 100,
            noise_scale: 1.0,
            seed: 0,
            class_signal: 1.0,
            ambiguity_signal: 1.0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let s: f64 = self.entropy_profile.iter().sum();
        if self.entropy_profile.iter().any(|w| !(*w >= 0.0)) || (s - 1.0).abs() > 1e-9 {
            return Err(Error::config("entropy_profile must lie on the simplex"));
        }
        if self.annotators_per_item == 0 {
            return Err(Error::config("annotators_per_item must be >= 1"));
        }
        if self.k < 2 || self.n_items == 0 || self.n_features == 0 {
            return Err(Error::config("need k >= 2, n_items >= 1 and n_features >= 1"));
        }
        if !(self.noise_scale >= 0.0) {
            return Err(Error::config("noise_scale must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub dataset: Dataset,
    pub features: FeatureTable,
    /// True label distributions, aligned with `dataset.items`.
    pub true_dists: Vec<LabelDistribution>,
    /// Stratum index (0 low, 1 mid, 2 high), aligned with `dataset.items`.
    pub strata: Vec<usize>,
}

pub fn item_id(i: usize) -> String {
    format!("syn{i:06}")
}

fn multinomial(rng: &mut SplitMix64, probs: &[f64], n: u64) -> Vec<u64> {
    // conditional binomials, each by direct Bernoulli counting or a normal
    // approximation when n is large
    let mut counts = vec![0u64; probs.len()];
    let mut left = n;
    let mut mass = 1.0;
    for (c, &p) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        if c == probs.len() - 1 || mass <= 0.0 {
            counts[c] = left;
            break;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let draw = binomial(rng, left, q);
        counts[c] = draw;
        left -= draw;
        mass -= p;
    }
    counts
}

fn binomial(rng: &mut SplitMix64, n: u64, p: f64) -> u64 {
    if n <= 1000 {
        return (0..n).filter(|_| rng.next_f64() < p).count() as u64;
    }
    let mean = n as f64 * p;
    let sd = (mean * (1.0 - p)).sqrt();
    (mean + sd * rng.standard_normal()).round().clamp(0.0, n as f64) as u64
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let (k, d) = (spec.k, spec.n_features);
    let mut geo = SplitMix64::derive(spec.seed, 1);
    let scale = 1.0 / (d as f64).sqrt();
    let class_dirs: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..d).map(|_| scale * geo.standard_normal()).collect())
        .collect();
    let shape_proj: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..d).map(|_| scale * geo.standard_normal()).collect())
        .collect();

    let mut rng = SplitMix64::derive(spec.seed, 2);
    let mut items = Vec::with_capacity(spec.n_items);
    let mut rows = HashMap::with_capacity(spec.n_items);
    let mut true_dists = Vec::with_capacity(spec.n_items);
    let mut strata = Vec::with_capacity(spec.n_items);
    for i in 0..spec.n_items {
        let stratum = rng.categorical(&spec.entropy_profile);
        let nominal = rng.below(k as u64) as usize;
        let (base, peak) = STRATUM_CONCENTRATION[stratum];
        let mut conc = vec![base; k];
        conc[nominal] += peak;
        let pi = rng.dirichlet(&conc);

        let logs: Vec<f64> = pi.iter().map(|p| p.max(CLR_FLOOR).ln()).collect();
        let centre = logs.iter().sum::<f64>() / k as f64;
        let mut x: Vec<f64> = (0..d).map(|_| spec.noise_scale * rng.standard_normal()).collect();
        for c in 0..k {
            let clr = logs[c] - centre;
            let cls = if c == nominal { spec.class_signal } else { 0.0 };
            for j in 0..d {
                x[j] += cls * class_dirs[c][j] + spec.ambiguity_signal * clr * shape_proj[c][j];
            }
        }

        let counts = multinomial(&mut rng, &pi, spec.annotators_per_item);
        let id = item_id(i);
        items.push(Item {
            item_id: id.clone(),
            text: None,
            counts: AnnotationCounts::new(counts)?,
        });
        rows.insert(id, x);
        true_dists.push(LabelDistribution::from_weights(&pi)?);
        strata.push(stratum);
    }
    Ok(SyntheticData {
        dataset: Dataset::new(items, (0..k).map(|c| format!("class{c}")).collect())?,
        features: FeatureTable { dim: d, rows },
        true_dists,
        strata,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaterPoolSpec {
    pub n_raters: usize,
    pub raters_per_item: usize,
    /// The first `noisy_raters` raters label uniformly at random.
    pub noisy_raters: usize,
    pub seed: u64,
}

/// Long-format annotations: each item is labelled by `raters_per_item`
/// distinct raters from the pool, each drawing from the item's distribution.
pub fn generate_rater_matrix(
    item_ids: &[String],
    dists: &[LabelDistribution],
    spec: &RaterPoolSpec,
) -> Result<AnnotationMatrix> {
    if item_ids.len() != dists.len() || dists.is_empty() {
        return Err(Error::Validation("item ids and distributions must be non-empty and aligned".into()));
    }
    if spec.raters_per_item == 0 || spec.raters_per_item > spec.n_raters || spec.noisy_raters > spec.n_raters {
        return Err(Error::config("need 1 <= raters_per_item <= n_raters and noisy_raters <= n_raters"));
    }
    let k = dists[0].k();
    let uniform = vec![1.0 / k as f64; k];
    let mut rng = SplitMix64::derive(spec.seed, 3);
    let mut pool: Vec<usize> = (0..spec.n_raters).collect();
    let mut records = Vec::with_capacity(item_ids.len() * spec.raters_per_item);
    for (id, dist) in item_ids.iter().zip(dists) {
        // partial Fisher-Yates: the first raters_per_item slots are the sample
        for s in 0..spec.raters_per_item {
            let j = s + rng.below((spec.n_raters - s) as u64) as usize;
            pool.swap(s, j);
        }
        let mut chosen = pool[..spec.raters_per_item].to_vec();
        chosen.sort_unstable();
        for r in chosen {
            let probs = if r < spec.noisy_raters { &uniform[..] } else { dist.probs() };
            records.push(AnnotationRecord {
                item_id: id.clone(),
                annotator_id: format!("r{r:04}"),
                label: rng.categorical(probs),
            });
        }
    }
    AnnotationMatrix::new(records, (0..k).map(|c| format!("class{c}")).collect())
}
