//! Paired tests, multiple-comparison correction and effect sizes.
//!
//! Student-t tail probabilities come from the regularized incomplete beta
//! function evaluated by continued fraction; no statistics library is used.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sidedness {
    /// Alternative: mean(x - y) > 0.
    One,
    Two,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    pub p: f64,
    pub mean_diff: f64,
    pub sd_diff: f64,
    pub n: usize,
    pub sided: Sidedness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolmResult {
    pub reject: Vec<bool>,
    pub adjusted: Vec<f64>,
}

/// Arithmetic mean, shifted by the first value so that a constant input
/// returns that constant exactly.
pub fn mean(x: &[f64]) -> f64 {
    let Some(&x0) = x.first() else {
        return f64::NAN;
    };
    x0 + x.iter().map(|v| v - x0).sum::<f64>() / x.len() as f64
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
pub fn sample_sd(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

/// ln Γ(x) for x > 0 (Lanczos, g = 7, 9 coefficients).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularized incomplete beta I_x(a, b). `one_minus_x` is passed separately
/// so callers can avoid cancellation when x is close to 1.
pub fn incomplete_beta(a: f64, b: f64, x: f64, one_minus_x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if one_minus_x <= 0.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * one_minus_x.ln();
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_cf(a, b, x) / a
    } else {
        1.0 - ln_front.exp() * beta_cf(b, a, one_minus_x) / b
    }
}

// Modified Lentz evaluation of the incomplete-beta continued fraction.
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// P(T > t) for Student's t with `df` degrees of freedom.
pub fn student_t_sf(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return if t > 0.0 { 0.0 } else { 1.0 };
    }
    let t2 = t * t;
    let x = df / (df + t2);
    let one_minus_x = t2 / (df + t2);
    let tail = 0.5 * incomplete_beta(df / 2.0, 0.5, x, one_minus_x);
    if t > 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

/// Paired t-test on `x - y`. One-sided tests use the alternative mean(x - y) > 0.
pub fn paired_ttest(x: &[f64], y: &[f64], sided: Sidedness) -> Result<TTest> {
    if x.len() != y.len() {
        return Err(Error::Data(format!("paired samples differ in length: {} vs {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::Data("paired t-test needs at least 2 pairs".into()));
    }
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let n = d.len();
    let m = mean(&d);
    let sd = sample_sd(&d);
    if sd == 0.0 || sd <= 1e-14 * m.abs() {
        return Err(Error::DegenerateDifferences);
    }
    let t = m / (sd / (n as f64).sqrt());
    let df = (n - 1) as f64;
    let p = match sided {
        Sidedness::One => student_t_sf(t, df),
        Sidedness::Two => (2.0 * student_t_sf(t.abs(), df)).min(1.0),
    };
    Ok(TTest {
        t,
        df,
        p,
        mean_diff: m,
        sd_diff: sd,
        n,
        sided,
    })
}

fn check_pvals(pvals: &[f64]) -> Result<()> {
    if let Some(p) = pvals.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::config(format!("p-value {p} outside [0, 1]")));
    }
    Ok(())
}

/// Holm's step-down procedure. Adjusted p-values are monotone in sorted order.
pub fn holm_bonferroni(pvals: &[f64], alpha: f64) -> Result<HolmResult> {
    check_pvals(pvals)?;
    let m = pvals.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pvals[a].partial_cmp(&pvals[b]).unwrap().then(a.cmp(&b)));
    let mut adjusted = vec![0.0; m];
    let mut running: f64 = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        running = running.max(((m - rank) as f64 * pvals[i]).min(1.0));
        adjusted[i] = running;
    }
    let reject = adjusted.iter().map(|&p| p <= alpha).collect();
    Ok(HolmResult { reject, adjusted })
}

/// Single-step Bonferroni rejections.
pub fn bonferroni(pvals: &[f64], alpha: f64) -> Result<Vec<bool>> {
    check_pvals(pvals)?;
    let m = pvals.len() as f64;
    Ok(pvals.iter().map(|&p| p * m <= alpha).collect())
}

/// Mean difference over the pooled (sample) standard deviation.
pub fn cohens_d(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Data("cohen's d needs two equal-length samples of size >= 2".into()));
    }
    let diff = mean(x) - mean(y);
    let pooled = ((sample_sd(x).powi(2) + sample_sd(y).powi(2)) / 2.0).sqrt();
    if pooled == 0.0 {
        return Err(Error::DegenerateVariance("pooled samples"));
    }
    Ok(diff / pooled)
}

/// Percentage of the hard-to-full improvement captured at `at_n`:
/// `100 (at_n - hard) / (full - hard)`. Works unchanged for lower-is-better
/// and higher-is-better metrics.
pub fn pct_improvement(hard: f64, at_n: f64, full: f64) -> Result<f64> {
    if full == hard {
        return Err(Error::ZeroRange);
    }
    Ok(100.0 * ((at_n - hard) / (full - hard)))
}
