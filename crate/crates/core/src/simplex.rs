//! Probability-simplex primitives shared by every other module.
//!
//! Divergences are in nats; entropy is in bits. Every `0 * log 0` term is 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `sum(probs) == 1` for a valid distribution.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Floor applied to predicted probabilities before a divergence is taken.
pub const PROB_FLOOR: f64 = 1e-12;

/// A point on the K-simplex: a human label distribution or a model prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LabelDistribution {
    probs: Vec<f64>,
}

impl LabelDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::InvalidDistribution(format!(
                "need at least 2 classes, got {}",
                probs.len()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidDistribution(format!("entry {p} is negative or not finite")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidDistribution(format!("entries sum to {sum}")));
        }
        Ok(Self { probs })
    }

    /// Rescale non-negative weights onto the simplex.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) || !sum.is_finite() {
            return Err(Error::InvalidDistribution(format!("weights sum to {sum}")));
        }
        Self::new(weights.iter().map(|w| w / sum).collect())
    }

    pub fn one_hot(class: usize, k: usize) -> Self {
        assert!(class < k, "class {class} out of range for K={k}");
        let mut probs = vec![0.0; k];
        probs[class] = 1.0;
        Self { probs }
    }

    pub fn uniform(k: usize) -> Self {
        Self {
            probs: vec![1.0 / k as f64; k],
        }
    }

    pub fn k(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.probs
    }

    /// Index of the largest probability; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        argmax(&self.probs)
    }

    pub fn max_prob(&self) -> f64 {
        self.probs[self.argmax()]
    }
}

impl TryFrom<Vec<f64>> for LabelDistribution {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<LabelDistribution> for Vec<f64> {
    fn from(d: LabelDistribution) -> Self {
        d.probs
    }
}

/// Per-class vote counts for one item.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u64>", into = "Vec<u64>")]
pub struct AnnotationCounts {
    counts: Vec<u64>,
}

impl AnnotationCounts {
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        if counts.len() < 2 {
            return Err(Error::InvalidDistribution(format!(
                "need at least 2 classes, got {}",
                counts.len()
            )));
        }
        if counts.iter().sum::<u64>() == 0 {
            return Err(Error::EmptyCounts);
        }
        Ok(Self { counts })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }
}

impl TryFrom<Vec<u64>> for AnnotationCounts {
    type Error = Error;

    fn try_from(v: Vec<u64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<AnnotationCounts> for Vec<u64> {
    fn from(c: AnnotationCounts) -> Self {
        c.counts
    }
}

/// One evaluated item: human reference, model prediction and optional logits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPair {
    pub item_id: String,
    pub human: LabelDistribution,
    pub predicted: LabelDistribution,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logits: Option<Vec<f64>>,
}

impl EvalPair {
    pub fn new(
        item_id: impl Into<String>,
        human: LabelDistribution,
        predicted: LabelDistribution,
    ) -> Result<Self> {
        if human.k() != predicted.k() {
            return Err(Error::ClassMismatch {
                expected: human.k(),
                found: predicted.k(),
            });
        }
        Ok(Self {
            item_id: item_id.into(),
            human,
            predicted,
            logits: None,
        })
    }

    pub fn with_logits(mut self, logits: Vec<f64>) -> Result<Self> {
        if logits.len() != self.human.k() {
            return Err(Error::ClassMismatch {
                expected: self.human.k(),
                found: logits.len(),
            });
        }
        self.logits = Some(logits);
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DivergenceKind {
    Kl,
    Jsd,
}

pub fn normalize_counts(counts: &AnnotationCounts) -> LabelDistribution {
    let total = counts.total() as f64;
    LabelDistribution {
        probs: counts.counts().iter().map(|&c| c as f64 / total).collect(),
    }
}

pub fn entropy_bits(dist: &LabelDistribution) -> f64 {
    -dist
        .probs()
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.log2())
        .sum::<f64>()
}

/// KL(reference ‖ predicted) or JSD(reference, predicted) in nats, with the
/// prediction floored at [`PROB_FLOOR`] and renormalized first.
pub fn divergence(
    reference: &LabelDistribution,
    predicted: &LabelDistribution,
    kind: DivergenceKind,
) -> Result<f64> {
    divergence_with_floor(reference, predicted, kind, Some(PROB_FLOOR))
}

/// As [`divergence`], with the floor configurable. `None` disables flooring,
/// in which case a zero predicted entry under positive reference mass is a
/// [`Error::SupportMismatch`] for KL.
pub fn divergence_with_floor(
    reference: &LabelDistribution,
    predicted: &LabelDistribution,
    kind: DivergenceKind,
    floor: Option<f64>,
) -> Result<f64> {
    if reference.k() != predicted.k() {
        return Err(Error::ClassMismatch {
            expected: reference.k(),
            found: predicted.k(),
        });
    }
    match kind {
        DivergenceKind::Kl => {
            let q = match floor {
                Some(f) => floored(predicted.probs(), f),
                None => predicted.probs().to_vec(),
            };
            kl_nats(reference.probs(), &q)
        }
        DivergenceKind::Jsd => {
            // the mixture is positive wherever either side is, so no floor is needed
            let a = reference.probs();
            let b = predicted.probs();
            let m: Vec<f64> = a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect();
            let js = 0.5 * kl_nats(a, &m)? + 0.5 * kl_nats(b, &m)?;
            Ok(js.clamp(0.0, std::f64::consts::LN_2))
        }
    }
}

fn floored(p: &[f64], floor: f64) -> Vec<f64> {
    if p.iter().all(|&x| x >= floor) {
        return p.to_vec();
    }
    let raised: Vec<f64> = p.iter().map(|&x| x.max(floor)).collect();
    let s: f64 = raised.iter().sum();
    raised.into_iter().map(|x| x / s).collect()
}

fn kl_nats(p: &[f64], q: &[f64]) -> Result<f64> {
    let mut acc = 0.0;
    for (k, (&pk, &qk)) in p.iter().zip(q).enumerate() {
        if pk > 0.0 {
            if qk <= 0.0 {
                return Err(Error::SupportMismatch { class: k });
            }
            acc += pk * (pk.ln() - qk.ln());
        }
    }
    Ok(acc.max(0.0))
}

pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let s: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / s).collect()
}

/// Numerically stable log-softmax.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}
