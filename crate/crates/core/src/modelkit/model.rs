//! Softmax classifier with an optional tanh hidden layer.
//!
//! All parameters live in one flat vector so the optimizer and gradient checks
//! can treat them uniformly. Layout, row-major:
//! `[w1 (D×H), b1 (H)]` when a hidden layer is present, then `[w (I×K), b (K)]`
//! where `I` is `H` or `D`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::simplex::{softmax, LabelDistribution};

use super::loss::kl_loss_and_grad;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub n_features: usize,
    pub k: usize,
    pub hidden: Option<usize>,
    pub params: Vec<f64>,
}

impl ClassifierModel {
    /// Linear softmax, zero-initialized.
    pub fn linear(n_features: usize, k: usize) -> Self {
        Self {
            n_features,
            k,
            hidden: None,
            params: vec![0.0; n_features * k + k],
        }
    }

    /// Linear softmax with weights drawn from N(0, scale^2/n_features) and zero biases.
    pub fn linear_random(n_features: usize, k: usize, scale: f64, seed: u64) -> Self {
        let mut rng = SplitMix64::derive(seed, 0x6d6f_6465_6c);
        let s = scale / (n_features as f64).sqrt();
        let mut params: Vec<f64> = (0..n_features * k).map(|_| s * rng.standard_normal()).collect();
        params.extend(std::iter::repeat(0.0).take(k));
        Self {
            n_features,
            k,
            hidden: None,
            params,
        }
    }

    /// One hidden tanh layer; weights drawn from N(0, 1/fan_in).
    pub fn with_hidden(n_features: usize, hidden: usize, k: usize, seed: u64) -> Self {
        let mut rng = SplitMix64::derive(seed, 0x6d6f_6465_6c);
        let mut params = Vec::with_capacity(n_features * hidden + hidden + hidden * k + k);
        let s1 = (1.0 / n_features as f64).sqrt();
        params.extend((0..n_features * hidden).map(|_| s1 * rng.standard_normal()));
        params.extend(std::iter::repeat(0.0).take(hidden));
        let s2 = (1.0 / hidden as f64).sqrt();
        params.extend((0..hidden * k).map(|_| s2 * rng.standard_normal()));
        params.extend(std::iter::repeat(0.0).take(k));
        Self {
            n_features,
            k,
            hidden: Some(hidden),
            params,
        }
    }

    fn top_in(&self) -> usize {
        self.hidden.unwrap_or(self.n_features)
    }

    fn top_offset(&self) -> usize {
        self.hidden.map_or(0, |h| self.n_features * h + h)
    }

    /// Whether parameter `i` is a weight (decayed) rather than a bias.
    pub fn is_weight(&self, i: usize) -> bool {
        let top = self.top_offset();
        if i >= top {
            i - top < self.top_in() * self.k
        } else {
            i < self.n_features * self.hidden.unwrap_or(0)
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features {
            return Err(Error::Validation(format!(
                "feature vector has {} entries, model expects {}",
                x.len(),
                self.n_features
            )));
        }
        Ok(())
    }

    fn hidden_activations(&self, x: &[f64]) -> Option<Vec<f64>> {
        let h = self.hidden?;
        let d = self.n_features;
        let (w1, rest) = self.params.split_at(d * h);
        let b1 = &rest[..h];
        let mut a = b1.to_vec();
        for (xi, row) in x.iter().zip(w1.chunks_exact(h)) {
            if *xi != 0.0 {
                a.iter_mut().zip(row).for_each(|(a, w)| *a += xi * w);
            }
        }
        a.iter_mut().for_each(|v| *v = v.tanh());
        Some(a)
    }

    fn top(&self, input: &[f64]) -> Vec<f64> {
        let k = self.k;
        let off = self.top_offset();
        let n_in = self.top_in();
        let w = &self.params[off..off + n_in * k];
        let b = &self.params[off + n_in * k..];
        let mut z = b.to_vec();
        for (xi, row) in input.iter().zip(w.chunks_exact(k)) {
            if *xi != 0.0 {
                z.iter_mut().zip(row).for_each(|(z, w)| *z += xi * w);
            }
        }
        z
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(match self.hidden_activations(x) {
            Some(a) => self.top(&a),
            None => self.top(x),
        })
    }

    pub fn predict(&self, x: &[f64]) -> Result<LabelDistribution> {
        LabelDistribution::new(softmax(&self.logits(x)?))
    }

    /// Loss for one example; gradient is accumulated into `grad` scaled by `scale`.
    pub fn accumulate(&self, x: &[f64], target: &LabelDistribution, scale: f64, grad: &mut [f64]) -> Result<f64> {
        self.check_input(x)?;
        if target.k() != self.k {
            return Err(Error::ClassMismatch {
                expected: self.k,
                found: target.k(),
            });
        }
        let k = self.k;
        let hid = self.hidden_activations(x);
        let input: &[f64] = hid.as_deref().unwrap_or(x);
        let z = self.top(input);
        let (loss, dz) = kl_loss_and_grad(&z, target);
        let off = self.top_offset();
        let n_in = self.top_in();
        {
            let (gw, gb) = grad[off..].split_at_mut(n_in * k);
            for (xi, row) in input.iter().zip(gw.chunks_exact_mut(k)) {
                row.iter_mut().zip(&dz).for_each(|(g, d)| *g += scale * xi * d);
            }
            gb.iter_mut().zip(&dz).for_each(|(g, d)| *g += scale * d);
        }
        if let Some(h) = self.hidden {
            let a = hid.as_deref().unwrap_or_default();
            let w2 = &self.params[off..off + h * k];
            // back through tanh
            let da: Vec<f64> = (0..h)
                .map(|j| {
                    let s: f64 = w2[j * k..(j + 1) * k].iter().zip(&dz).map(|(w, d)| w * d).sum();
                    s * (1.0 - a[j] * a[j])
                })
                .collect();
            let d = self.n_features;
            let (gw1, gb1) = grad[..d * h + h].split_at_mut(d * h);
            for (xi, row) in x.iter().zip(gw1.chunks_exact_mut(h)) {
                if *xi != 0.0 {
                    row.iter_mut().zip(&da).for_each(|(g, d)| *g += scale * xi * d);
                }
            }
            gb1.iter_mut().zip(&da).for_each(|(g, d)| *g += scale * d);
        }
        Ok(loss)
    }

    /// Mean loss and mean gradient over a set of examples.
    pub fn loss_and_grad(&self, xs: &[Vec<f64>], targets: &[LabelDistribution]) -> Result<(f64, Vec<f64>)> {
        if xs.is_empty() || xs.len() != targets.len() {
            return Err(Error::Validation("features and targets must be non-empty and aligned".into()));
        }
        let scale = 1.0 / xs.len() as f64;
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        for (x, t) in xs.iter().zip(targets) {
            loss += self.accumulate(x, t, scale, &mut grad)?;
        }
        Ok((loss * scale, grad))
    }

    pub fn mean_loss(&self, xs: &[Vec<f64>], targets: &[LabelDistribution]) -> Result<f64> {
        if xs.is_empty() || xs.len() != targets.len() {
            return Err(Error::Validation("features and targets must be non-empty and aligned".into()));
        }
        let mut total = 0.0;
        for (x, t) in xs.iter().zip(targets) {
            total += super::loss::kl_loss(&self.logits(x)?, t);
        }
        Ok(total / xs.len() as f64)
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::{smooth_target, LS_ALPHA_GRID};

    fn random_model(rng: &mut SplitMix64, hidden: bool) -> ClassifierModel {
        let d = 2 + rng.below(5) as usize;
        let k = 2 + rng.below(3) as usize;
        let mut m = if hidden {
            ClassifierModel::with_hidden(d, 3, k, rng.next_u64())
        } else {
            ClassifierModel::linear(d, k)
        };
        m.params.iter_mut().for_each(|p| *p += 0.5 * rng.standard_normal());
        m
    }

    fn max_rel_err(m: &ClassifierModel, xs: &[Vec<f64>], ts: &[LabelDistribution]) -> f64 {
        let (_, g) = m.loss_and_grad(xs, ts).unwrap();
        let eps = 1e-5;
        let mut worst: f64 = 0.0;
        for i in 0..m.params.len() {
            let mut mp = m.clone();
            let mut mm = m.clone();
            mp.params[i] += eps;
            mm.params[i] -= eps;
            let fd = (mp.mean_loss(xs, ts).unwrap() - mm.mean_loss(xs, ts).unwrap()) / (2.0 * eps);
            worst = worst.max((fd - g[i]).abs() / g[i].abs().max(fd.abs()).max(1e-3));
        }
        worst
    }

    #[test]
    fn backprop_matches_finite_differences() {
        let mut rng = SplitMix64::new(5);
        for case in 0..40 {
            let m = random_model(&mut rng, case % 2 == 1);
            let xs: Vec<Vec<f64>> = (0..4)
                .map(|_| (0..m.n_features).map(|_| rng.standard_normal()).collect())
                .collect();
            let y = rng.below(m.k as u64) as usize;
            let alpha = LS_ALPHA_GRID[case % LS_ALPHA_GRID.len()];
            let ts = vec![
                LabelDistribution::new(rng.dirichlet(&vec![1.0; m.k])).unwrap(),
                LabelDistribution::one_hot(y, m.k),
                smooth_target(y, alpha, m.k).unwrap(),
                LabelDistribution::uniform(m.k),
            ];
            let e = max_rel_err(&m, &xs, &ts);
            assert!(e <= 1e-5, "case {case}: {e}");
        }
    }

    #[test]
    fn weight_mask_excludes_biases() {
        let m = ClassifierModel::with_hidden(2, 3, 2, 0);
        let mask: Vec<bool> = (0..m.params.len()).map(|i| m.is_weight(i)).collect();
        assert_eq!(mask.iter().filter(|&&w| w).count(), 2 * 3 + 3 * 2);
        assert!(!mask[6] && !mask[7] && !mask[8]);
        assert!(!mask[m.params.len() - 1]);
        let l = ClassifierModel::linear(3, 2);
        assert_eq!((0..8).filter(|&i| l.is_weight(i)).count(), 6);
    }

    #[test]
    fn wrong_width_is_rejected() {
        let m = ClassifierModel::linear(3, 2);
        assert!(m.logits(&[1.0, 2.0]).is_err());
    }
}
