//! Evaluation of predicted distributions against human label distributions.
//!
//! All reductions fold over items in item-id order, so every metric is
//! bit-identical under any permutation of its input.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplex::{divergence, entropy_bits, DivergenceKind, EvalPair};

pub const DEFAULT_BINS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationMethod {
    Pearson,
    Spearman,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub accuracy: f64,
    pub ece: f64,
    pub brier_soft: f64,
    pub dist_ece: f64,
    pub mean_kl: f64,
    /// `None` when either entropy vector has zero variance.
    pub entropy_pearson: Option<f64>,
    pub entropy_spearman: Option<f64>,
    pub n_items: usize,
    pub n_bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub rel: f64,
    pub res: f64,
    pub unc: f64,
    pub brier_soft: f64,
    /// `brier_soft - (rel - res + unc)`; zero when forecasts are constant within bins.
    pub residual: f64,
    pub n_bins: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Accuracy,
    BrierSoft,
    MeanKl,
    MeanJsd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TercileReport {
    pub kind: MetricKind,
    /// Low, medium and high human-entropy strata.
    pub values: [f64; 3],
    pub counts: [usize; 3],
}

fn canonical_order(pairs: &[EvalPair]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..pairs.len()).collect();
    idx.sort_by(|&a, &b| pairs[a].item_id.cmp(&pairs[b].item_id));
    idx
}

fn non_empty(pairs: &[EvalPair]) -> Result<()> {
    if pairs.is_empty() {
        Err(Error::EmptyEval)
    } else {
        Ok(())
    }
}

fn check_bins(n_bins: usize) -> Result<()> {
    if n_bins == 0 {
        Err(Error::config("n_bins must be >= 1"))
    } else {
        Ok(())
    }
}

fn check_plurality(pairs: &[EvalPair], plurality: &[usize]) -> Result<()> {
    if plurality.len() != pairs.len() {
        return Err(Error::Data(format!(
            "{} plurality labels for {} items",
            plurality.len(),
            pairs.len()
        )));
    }
    Ok(())
}

/// Equal-width bin on [0, 1]; the value 1.0 lands in the last bin.
pub fn bin_index(value: f64, n_bins: usize) -> usize {
    ((value * n_bins as f64).floor().max(0.0) as usize).min(n_bins - 1)
}

/// Plurality label implied by a human distribution (argmax, lowest index on ties).
pub fn plurality_from_pairs(pairs: &[EvalPair]) -> Vec<usize> {
    pairs.iter().map(|p| p.human.argmax()).collect()
}

pub fn accuracy(pairs: &[EvalPair], plurality: &[usize]) -> Result<f64> {
    non_empty(pairs)?;
    check_plurality(pairs, plurality)?;
    let hits = pairs.iter().zip(plurality).filter(|(p, &y)| p.predicted.argmax() == y).count();
    Ok(hits as f64 / pairs.len() as f64)
}

/// Confidence-vs-accuracy ECE against plurality labels.
pub fn ece_majority(pairs: &[EvalPair], plurality: &[usize], n_bins: usize) -> Result<f64> {
    non_empty(pairs)?;
    check_bins(n_bins)?;
    check_plurality(pairs, plurality)?;
    let mut count = vec![0usize; n_bins];
    let mut conf = vec![0.0; n_bins];
    let mut acc = vec![0.0; n_bins];
    for i in canonical_order(pairs) {
        let p = &pairs[i].predicted;
        let c = p.max_prob();
        let b = bin_index(c, n_bins);
        count[b] += 1;
        conf[b] += c;
        acc[b] += f64::from(u8::from(p.argmax() == plurality[i]));
    }
    let n = pairs.len() as f64;
    Ok((0..n_bins)
        .filter(|&b| count[b] > 0)
        .map(|b| {
            let nb = count[b] as f64;
            (nb / n) * (acc[b] / nb - conf[b] / nb).abs()
        })
        .sum())
}

/// Mean over items of the summed squared error between prediction and human distribution.
pub fn brier_soft(pairs: &[EvalPair]) -> Result<f64> {
    non_empty(pairs)?;
    let total: f64 = canonical_order(pairs)
        .into_iter()
        .map(|i| {
            let p = &pairs[i];
            p.predicted.probs().iter().zip(p.human.probs()).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
        })
        .sum();
    Ok(total / pairs.len() as f64)
}

/// Per-class binned calibration error against human class proportions,
/// unweighted mean over classes.
pub fn dist_ece(pairs: &[EvalPair], n_bins: usize) -> Result<f64> {
    non_empty(pairs)?;
    check_bins(n_bins)?;
    let k = pairs[0].human.k();
    let order = canonical_order(pairs);
    let n = pairs.len() as f64;
    let mut per_class = 0.0;
    for class in 0..k {
        let mut count = vec![0usize; n_bins];
        let mut ps = vec![0.0; n_bins];
        let mut hs = vec![0.0; n_bins];
        for &i in &order {
            let p = pairs[i].predicted.probs()[class];
            let b = bin_index(p, n_bins);
            count[b] += 1;
            ps[b] += p;
            hs[b] += pairs[i].human.probs()[class];
        }
        per_class += (0..n_bins)
            .filter(|&b| count[b] > 0)
            .map(|b| (count[b] as f64 / n) * ((ps[b] - hs[b]) / count[b] as f64).abs())
            .sum::<f64>();
    }
    Ok(per_class / k as f64)
}

fn mean_divergence(pairs: &[EvalPair], kind: DivergenceKind) -> Result<f64> {
    non_empty(pairs)?;
    let mut total = 0.0;
    for i in canonical_order(pairs) {
        total += divergence(&pairs[i].human, &pairs[i].predicted, kind)?;
    }
    Ok(total / pairs.len() as f64)
}

/// Mean KL(human ‖ predicted) in nats.
pub fn mean_kl(pairs: &[EvalPair]) -> Result<f64> {
    mean_divergence(pairs, DivergenceKind::Kl)
}

pub fn mean_jsd(pairs: &[EvalPair]) -> Result<f64> {
    mean_divergence(pairs, DivergenceKind::Jsd)
}

/// Correlation between per-item predicted entropy and human entropy (bits).
pub fn entropy_correlation(pairs: &[EvalPair], method: CorrelationMethod) -> Result<f64> {
    if pairs.len() < 3 {
        return Err(Error::Data(format!(
            "entropy correlation needs at least 3 items, got {}",
            pairs.len()
        )));
    }
    let order = canonical_order(pairs);
    let hp: Vec<f64> = order.iter().map(|&i| entropy_bits(&pairs[i].predicted)).collect();
    let hh: Vec<f64> = order.iter().map(|&i| entropy_bits(&pairs[i].human)).collect();
    correlation(&hp, &hh, method)
}

pub fn correlation(x: &[f64], y: &[f64], method: CorrelationMethod) -> Result<f64> {
    match method {
        CorrelationMethod::Pearson => pearson(x, y),
        CorrelationMethod::Spearman => pearson(&average_ranks(x), &average_ranks(y)),
    }
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    // relative guard: constant vectors leave only rounding noise in sxx
    let scale_x = x.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
    let scale_y = y.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
    if sxx <= 1e-24 * scale_x || sxx == 0.0 {
        return Err(Error::DegenerateVariance("predicted entropies"));
    }
    if syy <= 1e-24 * scale_y || syy == 0.0 {
        return Err(Error::DegenerateVariance("human entropies"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap_or(std::cmp::Ordering::Equal));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &t in &idx[i..=j] {
            ranks[t] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Reliability / resolution / uncertainty split of Brier-soft, binning each
/// class by its predicted probability.
pub fn murphy_decomposition(pairs: &[EvalPair], n_bins: usize) -> Result<DecompositionReport> {
    non_empty(pairs)?;
    check_bins(n_bins)?;
    let k = pairs[0].human.k();
    let order = canonical_order(pairs);
    let n = pairs.len() as f64;
    let (mut rel, mut res, mut unc) = (0.0, 0.0, 0.0);
    for class in 0..k {
        let hbar = order.iter().map(|&i| pairs[i].human.probs()[class]).sum::<f64>() / n;
        let mut count = vec![0usize; n_bins];
        let mut ps = vec![0.0; n_bins];
        let mut hs = vec![0.0; n_bins];
        for &i in &order {
            let p = pairs[i].predicted.probs()[class];
            let h = pairs[i].human.probs()[class];
            let b = bin_index(p, n_bins);
            count[b] += 1;
            ps[b] += p;
            hs[b] += h;
            unc += (h - hbar).powi(2);
        }
        for b in (0..n_bins).filter(|&b| count[b] > 0) {
            let nb = count[b] as f64;
            let (pb, hb) = (ps[b] / nb, hs[b] / nb);
            rel += nb * (pb - hb).powi(2);
            res += nb * (hb - hbar).powi(2);
        }
    }
    let (rel, res, unc) = (rel / n, res / n, unc / n);
    let bs = brier_soft(pairs)?;
    Ok(DecompositionReport {
        rel,
        res,
        unc,
        brier_soft: bs,
        residual: bs - (rel - res + unc),
        n_bins,
    })
}

/// Metric per human-entropy tercile. Items are sorted by human entropy (ties by
/// item id) and cut after the `ceil(n/3)`-th and `ceil(2n/3)`-th order statistics.
pub fn tercile_stratified(pairs: &[EvalPair], kind: MetricKind) -> Result<TercileReport> {
    non_empty(pairs)?;
    if pairs.len() < 3 {
        return Err(Error::Data(format!("terciles need at least 3 items, got {}", pairs.len())));
    }
    let n = pairs.len();
    let mut idx = canonical_order(pairs);
    let ent: Vec<f64> = pairs.iter().map(|p| entropy_bits(&p.human)).collect();
    idx.sort_by(|&a, &b| ent[a].partial_cmp(&ent[b]).unwrap_or(std::cmp::Ordering::Equal));
    let c1 = n.div_ceil(3);
    let c2 = (2 * n).div_ceil(3);
    let bounds = [(0, c1), (c1, c2), (c2, n)];
    let mut values = [0.0; 3];
    let mut counts = [0; 3];
    for (t, &(lo, hi)) in bounds.iter().enumerate() {
        let stratum: Vec<EvalPair> = idx[lo..hi].iter().map(|&i| pairs[i].clone()).collect();
        counts[t] = stratum.len();
        values[t] = match kind {
            MetricKind::Accuracy => accuracy(&stratum, &plurality_from_pairs(&stratum))?,
            MetricKind::BrierSoft => brier_soft(&stratum)?,
            MetricKind::MeanKl => mean_kl(&stratum)?,
            MetricKind::MeanJsd => mean_jsd(&stratum)?,
        };
    }
    Ok(TercileReport { kind, values, counts })
}

/// Every headline metric for one evaluation set.
pub fn evaluate(pairs: &[EvalPair], plurality: &[usize], n_bins: usize) -> Result<MetricReport> {
    Ok(MetricReport {
        accuracy: accuracy(pairs, plurality)?,
        ece: ece_majority(pairs, plurality, n_bins)?,
        brier_soft: brier_soft(pairs)?,
        dist_ece: dist_ece(pairs, n_bins)?,
        mean_kl: mean_kl(pairs)?,
        entropy_pearson: optional_correlation(pairs, CorrelationMethod::Pearson)?,
        entropy_spearman: optional_correlation(pairs, CorrelationMethod::Spearman)?,
        n_items: pairs.len(),
        n_bins,
    })
}

fn optional_correlation(pairs: &[EvalPair], method: CorrelationMethod) -> Result<Option<f64>> {
    match entropy_correlation(pairs, method) {
        Ok(r) => Ok(Some(r)),
        Err(Error::DegenerateVariance(_)) => Ok(None),
        Err(Error::Data(_)) if pairs.len() < 3 => Ok(None),
        Err(e) => Err(e),
    }
}
