//! Mini-batch gradient descent with decoupled weight decay and
//! best-validation-loss checkpoint selection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::simplex::LabelDistribution;

use super::model::ClassifierModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 32,
            learning_rate: 0.1,
            weight_decay: 0.0,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::config("epochs and batch_size must be >= 1"));
        }
        // zero is allowed: it leaves the model at its initialization
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::config("learning_rate must be finite and non-negative"));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::config("weight_decay must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub model: ClassifierModel,
    pub trace: Vec<EpochRecord>,
    pub best_epoch: usize,
}

pub fn train(
    init: &ClassifierModel,
    train_x: &[Vec<f64>],
    train_t: &[LabelDistribution],
    val_x: &[Vec<f64>],
    val_t: &[LabelDistribution],
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train_x.is_empty() || train_x.len() != train_t.len() {
        return Err(Error::Validation("training features and targets must be non-empty and aligned".into()));
    }
    if val_x.is_empty() || val_x.len() != val_t.len() {
        return Err(Error::Validation("validation features and targets must be non-empty and aligned".into()));
    }

    let decay_mask: Vec<bool> = (0..init.params.len()).map(|i| init.is_weight(i)).collect();
    let mut model = init.clone();
    let mut order: Vec<usize> = (0..train_x.len()).collect();
    let mut grad = vec![0.0; model.params.len()];
    let mut trace = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, ClassifierModel)> = None;
    let lr = config.learning_rate;

    for epoch in 1..=config.epochs {
        SplitMix64::derive(config.seed, epoch as u64).shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                epoch_loss += model.accumulate(&train_x[i], &train_t[i], scale, &mut grad)? * scale;
            }
            for ((p, g), &decay) in model.params.iter_mut().zip(&grad).zip(&decay_mask) {
                if decay {
                    *p -= lr * config.weight_decay * *p;
                }
                *p -= lr * g;
            }
        }
        let n_batches = order.len().div_ceil(config.batch_size) as f64;
        let train_loss = epoch_loss / n_batches;
        let val_loss = model.mean_loss(val_x, val_t)?;
        if !train_loss.is_finite() || !val_loss.is_finite() || !model.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        trace.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
        });
        if best.as_ref().is_none_or(|(b, _, _)| val_loss < *b) {
            best = Some((val_loss, epoch, model.clone()));
        }
    }
    let (_, best_epoch, model) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        model,
        trace,
        best_epoch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<LabelDistribution>) {
        let mut rng = SplitMix64::new(seed);
        let mut xs = Vec::new();
        let mut ts = Vec::new();
        for i in 0..n {
            let y = i % 2;
            let sign = if y == 0 { 1.0 } else { -1.0 };
            let x = vec![sign * (0.5 + rng.next_f64()), rng.standard_normal()];
            xs.push(x);
            ts.push(LabelDistribution::one_hot(y, 2));
        }
        (xs, ts)
    }

    #[test]
    fn zero_learning_rate_returns_initialization() {
        let (xs, ts) = separable(20, 1);
        let init = ClassifierModel::with_hidden(2, 3, 2, 9);
        let cfg = TrainConfig {
            learning_rate: 0.0,
            weight_decay: 0.1,
            epochs: 3,
            ..Default::default()
        };
        let out = train(&init, &xs, &ts, &xs, &ts, &cfg).unwrap();
        assert_eq!(out.model, init);
    }

    #[test]
    fn separable_data_is_learned() {
        let (xs, ts) = separable(200, 2);
        let (vx, vt) = separable(50, 3);
        let cfg = TrainConfig {
            epochs: 100,
            ..Default::default()
        };
        let out = train(&ClassifierModel::linear(2, 2), &xs, &ts, &vx, &vt, &cfg).unwrap();
        let correct = xs
            .iter()
            .zip(&ts)
            .filter(|(x, t)| out.model.predict(x).unwrap().argmax() == t.argmax())
            .count();
        assert!(correct as f64 / xs.len() as f64 >= 0.99);
    }

    #[test]
    fn deterministic_and_best_epoch_is_minimal() {
        let (xs, ts) = separable(60, 4);
        let (vx, vt) = separable(20, 5);
        let cfg = TrainConfig {
            epochs: 15,
            batch_size: 7,
            learning_rate: 0.5,
            weight_decay: 0.01,
            seed: 3,
        };
        let init = ClassifierModel::with_hidden(2, 4, 2, 1);
        let a = train(&init, &xs, &ts, &vx, &vt, &cfg).unwrap();
        let b = train(&init, &xs, &ts, &vx, &vt, &cfg).unwrap();
        assert_eq!(a, b);
        let best = a.trace[a.best_epoch - 1].val_loss;
        assert!(a.trace.iter().all(|r| best <= r.val_loss));
        assert_eq!(a.model.mean_loss(&vx, &vt).unwrap(), best);
    }

    #[test]
    fn divergence_is_reported() {
        let (mut xs, ts) = separable(10, 6);
        xs[0][0] = 1e300;
        let cfg = TrainConfig {
            learning_rate: 1e10,
            ..Default::default()
        };
        let r = train(&ClassifierModel::linear(2, 2), &xs, &ts, &xs, &ts, &cfg);
        assert!(matches!(r, Err(Error::TrainingDiverged { epoch: 1 })));
    }

    #[test]
    fn bad_config_is_rejected() {
        let (xs, ts) = separable(4, 7);
        let cfg = TrainConfig {
            epochs: 0,
            ..Default::default()
        };
        assert!(matches!(
            train(&ClassifierModel::linear(2, 2), &xs, &ts, &xs, &ts, &cfg),
            Err(Error::Config(_))
        ));
    }
}
