//! Post-hoc temperature scaling: p = softmax(z / T).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplex::{log_softmax, softmax, LabelDistribution};

pub const T_MIN: f64 = 0.05;
pub const T_MAX: f64 = 20.0;
pub const T_TOL: f64 = 1e-4;
const GRID_POINTS: usize = 61;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemperatureObjective {
    /// Negative log-likelihood of the target's argmax class.
    NllHard,
    /// Mean KL(target || softmax(z/T)).
    KlSoft,
}

pub fn apply_temperature(logits: &[f64], t: f64) -> Result<LabelDistribution> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::config(format!("temperature must be positive, got {t}")));
    }
    let scaled: Vec<f64> = logits.iter().map(|z| z / t).collect();
    LabelDistribution::new(softmax(&scaled))
}

fn objective(logits: &[Vec<f64>], targets: &[LabelDistribution], kind: TemperatureObjective, t: f64) -> f64 {
    let mut total = 0.0;
    let mut scaled = Vec::new();
    for (z, h) in logits.iter().zip(targets) {
        scaled.clear();
        scaled.extend(z.iter().map(|v| v / t));
        let ls = log_softmax(&scaled);
        total += match kind {
            TemperatureObjective::NllHard => -ls[h.argmax()],
            TemperatureObjective::KlSoft => h
                .probs()
                .iter()
                .zip(&ls)
                .filter(|(&p, _)| p > 0.0)
                .map(|(&p, &l)| p * (p.ln() - l))
                .sum(),
        };
    }
    total / logits.len() as f64
}

fn golden(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    // interval is in log T; stop once its width in T is below tolerance
    while b.exp() - a.exp() > T_TOL {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    (a + b) / 2.0
}

/// Fits T on `[0.05, 20]` by golden-section search over log T. A coarse grid
/// scan guards against non-unimodal objectives: if any grid point beats the
/// golden-section optimum, the search is repeated around the best grid point.
pub fn fit_temperature(logits: &[Vec<f64>], targets: &[LabelDistribution], kind: TemperatureObjective) -> Result<f64> {
    if logits.is_empty() {
        return Err(Error::EmptyEval);
    }
    if logits.len() != targets.len() {
        return Err(Error::Validation("logits and targets must be aligned".into()));
    }
    for (z, h) in logits.iter().zip(targets) {
        if z.len() != h.k() {
            return Err(Error::ClassMismatch {
                expected: h.k(),
                found: z.len(),
            });
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("non-finite logit".into()));
        }
    }
    let spread = logits
        .iter()
        .map(|z| {
            let hi = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = z.iter().cloned().fold(f64::INFINITY, f64::min);
            hi - lo
        })
        .fold(0.0, f64::max);
    if spread == 0.0 {
        return Err(Error::DegenerateLogits);
    }

    let f = |u: f64| objective(logits, targets, kind, u.exp());
    let (lo, hi) = (T_MIN.ln(), T_MAX.ln());
    let mut u = golden(&f, lo, hi);
    let mut best = f(u);

    let step = (hi - lo) / (GRID_POINTS - 1) as f64;
    let grid: Vec<(f64, f64)> = (0..GRID_POINTS)
        .map(|i| {
            let g = lo + step * i as f64;
            (g, f(g))
        })
        .collect();
    let (gu, gf) = grid
        .iter()
        .cloned()
        .fold((f64::NAN, f64::INFINITY), |acc, p| if p.1 < acc.1 { p } else { acc });
    if gf < best - 1e-12 * best.abs().max(1.0) {
        u = golden(&f, (gu - step).max(lo), (gu + step).min(hi));
        best = f(u);
        if gf < best {
            u = gu;
        }
    }
    Ok(u.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn random_logits(rng: &mut SplitMix64, n: usize, k: usize) -> Vec<Vec<f64>> {
        (0..n).map(|_| (0..k).map(|_| 3.0 * rng.standard_normal()).collect()).collect()
    }

    #[test]
    fn hand_example() {
        let p = apply_temperature(&[2f64.ln(), 0.0], 1.0).unwrap();
        assert!((p.probs()[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!(matches!(apply_temperature(&[1.0, 0.0], 0.0), Err(Error::Config(_))));
        assert!(matches!(apply_temperature(&[1.0, 0.0], -1.0), Err(Error::Config(_))));
    }

    #[test]
    fn recovers_constructed_temperature() {
        let mut rng = SplitMix64::new(8);
        let z = random_logits(&mut rng, 300, 3);
        for t_true in [1.0, 2.0, 0.5] {
            let h: Vec<_> = z.iter().map(|z| apply_temperature(z, t_true).unwrap()).collect();
            let t = fit_temperature(&z, &h, TemperatureObjective::KlSoft).unwrap();
            assert!((t - t_true).abs() < 1e-3, "{t} vs {t_true}");
        }
    }

    #[test]
    fn nll_is_unimodal_and_finite() {
        let mut rng = SplitMix64::new(9);
        let z = random_logits(&mut rng, 200, 4);
        let h: Vec<_> = z
            .iter()
            .map(|z| {
                let p = apply_temperature(z, 3.0).unwrap();
                LabelDistribution::one_hot(rng.categorical(p.probs()), 4)
            })
            .collect();
        let t = fit_temperature(&z, &h, TemperatureObjective::NllHard).unwrap();
        assert!((T_MIN..=T_MAX).contains(&t));
        let f = |t: f64| objective(&z, &h, TemperatureObjective::NllHard, t);
        assert!(f(t) <= f(t * 1.01) + 1e-12 && f(t) <= f(t / 1.01) + 1e-12);
    }

    #[test]
    fn constant_logits_are_degenerate() {
        let z = vec![vec![1.0, 1.0, 1.0]; 5];
        let h = vec![LabelDistribution::uniform(3); 5];
        assert!(matches!(
            fit_temperature(&z, &h, TemperatureObjective::KlSoft),
            Err(Error::DegenerateLogits)
        ));
    }

    #[test]
    fn argmax_is_invariant() {
        let mut rng = SplitMix64::new(10);
        for z in random_logits(&mut rng, 2000, 5) {
            let a = LabelDistribution::new(softmax(&z)).unwrap().argmax();
            for t in [0.05, 0.1, 0.5, 1.0, 2.0, 10.0, 20.0] {
                assert_eq!(apply_temperature(&z, t).unwrap().argmax(), a);
            }
        }
    }
}
