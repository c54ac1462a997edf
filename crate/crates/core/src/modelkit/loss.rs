//! KL(target || softmax(z)) and its gradient with respect to the logits.
//!
//! With a one-hot target this is cross-entropy; smoothed and soft targets use
//! the same function.

use crate::simplex::{log_softmax, softmax, LabelDistribution};

/// Loss only, in nats.
pub fn kl_loss(logits: &[f64], target: &LabelDistribution) -> f64 {
    let ls = log_softmax(logits);
    target
        .probs()
        .iter()
        .zip(&ls)
        .filter(|(&h, _)| h > 0.0)
        .map(|(&h, &l)| h * (h.ln() - l))
        .sum()
}

/// Loss and `softmax(z) - target`.
pub fn kl_loss_and_grad(logits: &[f64], target: &LabelDistribution) -> (f64, Vec<f64>) {
    let p = softmax(logits);
    let grad = p.iter().zip(target.probs()).map(|(p, h)| p - h).collect();
    (kl_loss(logits, target), grad)
}
