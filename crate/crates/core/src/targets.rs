//! Training-target construction and annotator subsampling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::simplex::{normalize_counts, AnnotationCounts, LabelDistribution};

/// Label-smoothing intensities swept by the gatekeeping comparison.
pub const LS_ALPHA_GRID: [f64; 5] = [0.05, 0.1, 0.2, 0.3, 0.5];

/// Default annotator-subsampling seeds.
pub const DEFAULT_SUBSAMPLE_SEEDS: [u64; 5] = [100, 101, 102, 103, 104];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetMode {
    Hard,
    Smoothed,
    Soft,
    Dirichlet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub mode: TargetMode,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subsample_n: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subsample_seed: Option<u64>,
}

impl TargetSpec {
    pub fn hard() -> Self {
        Self::with_mode(TargetMode::Hard, 0.0)
    }

    pub fn smoothed(alpha: f64) -> Self {
        Self::with_mode(TargetMode::Smoothed, alpha)
    }

    pub fn soft() -> Self {
        Self::with_mode(TargetMode::Soft, 0.0)
    }

    pub fn dirichlet(alpha: f64) -> Self {
        Self::with_mode(TargetMode::Dirichlet, alpha)
    }

    fn with_mode(mode: TargetMode, alpha: f64) -> Self {
        Self {
            mode,
            alpha,
            subsample_n: None,
            subsample_seed: None,
        }
    }

    pub fn subsampled(mut self, n: u64, seed: u64) -> Self {
        self.subsample_n = Some(n);
        self.subsample_seed = Some(seed);
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.mode {
            TargetMode::Smoothed if !(0.0..1.0).contains(&self.alpha) => {
                Err(Error::config(format!("smoothing alpha {} outside [0, 1)", self.alpha)))
            }
            TargetMode::Dirichlet if !(self.alpha > 0.0) => {
                Err(Error::config(format!("dirichlet alpha {} must be > 0", self.alpha)))
            }
            _ => match self.subsample_n {
                Some(0) => Err(Error::config("subsample size must be >= 1")),
                _ => Ok(()),
            },
        }
    }

    /// Build the target for one item. `item_index` decorrelates the subsample
    /// stream across items that share a seed.
    pub fn build(&self, counts: &AnnotationCounts, item_index: u64) -> Result<LabelDistribution> {
        self.validate()?;
        let owned;
        let counts = match self.subsample_n {
            Some(n) if n != counts.total() => {
                let seed = item_seed(self.subsample_seed.unwrap_or(0), item_index);
                owned = subsample_counts(counts, n, seed)?;
                &owned
            }
            _ => counts,
        };
        match self.mode {
            TargetMode::Hard => Ok(hard_target(counts)),
            TargetMode::Smoothed => smooth_target(plurality_label(counts), self.alpha, counts.k()),
            TargetMode::Soft => Ok(soft_target(counts)),
            TargetMode::Dirichlet => dirichlet_target(counts, self.alpha),
        }
    }

    /// Short identifier used in report rows, e.g. `ls0.3`, `soft@N10`.
    pub fn label(&self) -> String {
        let base = match self.mode {
            TargetMode::Hard => "hard".to_string(),
            TargetMode::Soft => "soft".to_string(),
            TargetMode::Smoothed => format!("ls{}", self.alpha),
            TargetMode::Dirichlet => format!("dir{:.4}", self.alpha),
        };
        match self.subsample_n {
            Some(n) => format!("{base}@N{n}"),
            None => base,
        }
    }
}

/// Seed for one item's draw, derived from the run's subsample seed.
pub fn item_seed(seed: u64, item_index: u64) -> u64 {
    SplitMix64::derive(seed, item_index).next_u64()
}

/// Argmax of the counts; ties resolve to the lowest class index.
pub fn plurality_label(counts: &AnnotationCounts) -> usize {
    let c = counts.counts();
    let mut best = 0;
    for k in 1..c.len() {
        if c[k] > c[best] {
            best = k;
        }
    }
    best
}

pub fn hard_target(counts: &AnnotationCounts) -> LabelDistribution {
    LabelDistribution::one_hot(plurality_label(counts), counts.k())
}

/// `(1 - alpha) * onehot(label) + alpha / k`.
pub fn smooth_target(label: usize, alpha: f64, k: usize) -> Result<LabelDistribution> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::config(format!("smoothing alpha {alpha} outside [0, 1)")));
    }
    if k < 2 || label >= k {
        return Err(Error::config(format!("label {label} invalid for K={k}")));
    }
    let off = alpha / k as f64;
    let mut probs = vec![off; k];
    probs[label] = (1.0 - alpha) + off;
    LabelDistribution::new(probs)
}

pub fn soft_target(counts: &AnnotationCounts) -> LabelDistribution {
    normalize_counts(counts)
}

/// Posterior mean under a symmetric Dirichlet(alpha) prior: `(c_k + a) / (n + K a)`.
pub fn dirichlet_target(counts: &AnnotationCounts, alpha: f64) -> Result<LabelDistribution> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::config(format!("dirichlet alpha {alpha} must be finite and > 0")));
    }
    let k = counts.k() as f64;
    let denom = counts.total() as f64 + k * alpha;
    let mut probs: Vec<f64> = counts.counts().iter().map(|&c| (c as f64 + alpha) / denom).collect();
    // renormalize away rounding so the simplex tolerance always holds
    let s: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= s);
    LabelDistribution::new(probs)
}

/// Draw `n` annotators without replacement from the vote urn described by `counts`
/// (a multivariate hypergeometric draw).
pub fn subsample_counts(counts: &AnnotationCounts, n: u64, seed: u64) -> Result<AnnotationCounts> {
    let total = counts.total();
    if n == 0 {
        return Err(Error::config("subsample size must be >= 1"));
    }
    if n > total {
        return Err(Error::InsufficientAnnotators {
            requested: n,
            available: total,
        });
    }
    if n == total {
        return Ok(counts.clone());
    }
    let mut rng = SplitMix64::new(seed);
    let mut remaining = counts.counts().to_vec();
    let mut drawn = vec![0u64; remaining.len()];
    draw_into(&mut rng, &mut remaining, &mut drawn, total, n);
    AnnotationCounts::new(drawn)
}

/// Partition the urn into a training draw of `n_train` and a disjoint held-out
/// draw of `n_eval` annotators.
pub fn split_annotator_pool(
    counts: &AnnotationCounts,
    n_train: u64,
    n_eval: u64,
    seed: u64,
) -> Result<(AnnotationCounts, AnnotationCounts)> {
    if n_train == 0 || n_eval == 0 {
        return Err(Error::config("both sides of an annotator split need >= 1 annotator"));
    }
    let total = counts.total();
    if n_train + n_eval > total {
        return Err(Error::InsufficientAnnotators {
            requested: n_train + n_eval,
            available: total,
        });
    }
    let mut rng = SplitMix64::new(seed);
    let mut remaining = counts.counts().to_vec();
    let mut train = vec![0u64; remaining.len()];
    let mut eval = vec![0u64; remaining.len()];
    draw_into(&mut rng, &mut remaining, &mut train, total, n_train);
    draw_into(&mut rng, &mut remaining, &mut eval, total - n_train, n_eval);
    Ok((AnnotationCounts::new(train)?, AnnotationCounts::new(eval)?))
}

// Sequential urn draws: each step picks one of the `pool` remaining ballots uniformly.
fn draw_into(rng: &mut SplitMix64, remaining: &mut [u64], out: &mut [u64], mut pool: u64, n: u64) {
    for _ in 0..n {
        let mut r = rng.below(pool);
        let mut k = 0;
        while r >= remaining[k] {
            r -= remaining[k];
            k += 1;
        }
        remaining[k] -= 1;
        out[k] += 1;
        pool -= 1;
    }
}
