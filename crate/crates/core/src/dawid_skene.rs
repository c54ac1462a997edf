//! Dawid-Skene aggregation: one latent class per item, one confusion matrix
//! per annotator, fitted by EM.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::AnnotationMatrix;
use crate::simplex::LabelDistribution;

/// Pseudo-count added to every confusion cell in the M-step.
pub const CONFUSION_SMOOTHING: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DawidSkeneConfig {
    pub max_iter: usize,
    pub tol: f64,
    /// Recorded for provenance; initialization is deterministic (per-item vote fractions).
    pub seed: u64,
}

impl Default for DawidSkeneConfig {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DawidSkeneModel {
    pub item_ids: Vec<String>,
    pub annotator_ids: Vec<String>,
    pub class_names: Vec<String>,
    pub posteriors: Vec<LabelDistribution>,
    /// `confusion[a][true][said]`, each row on the simplex.
    pub confusion: Vec<Vec<Vec<f64>>>,
    pub class_prior: LabelDistribution,
    pub loglik_trace: Vec<f64>,
    pub iterations_run: usize,
    pub converged: bool,
    pub config: DawidSkeneConfig,
}

impl DawidSkeneModel {
    pub fn k(&self) -> usize {
        self.class_names.len()
    }

    pub fn posterior(&self, item_id: &str) -> Option<&LabelDistribution> {
        self.item_ids.iter().position(|i| i == item_id).map(|i| &self.posteriors[i])
    }

    /// Fraction of items whose posterior maximum exceeds `threshold`.
    pub fn fraction_confident(&self, threshold: f64) -> f64 {
        let n = self.posteriors.iter().filter(|p| p.max_prob() > threshold).count();
        n as f64 / self.posteriors.len() as f64
    }
}

struct Indexed {
    items: Vec<String>,
    annotators: Vec<String>,
    // per item: (annotator index, label)
    obs: Vec<Vec<(usize, usize)>>,
}

fn index(matrix: &AnnotationMatrix) -> Indexed {
    let mut item_idx: HashMap<&str, usize> = HashMap::new();
    let mut ann_idx: HashMap<&str, usize> = HashMap::new();
    let mut items = Vec::new();
    let mut annotators = Vec::new();
    let mut obs: Vec<Vec<(usize, usize)>> = Vec::new();
    for r in &matrix.records {
        let i = *item_idx.entry(r.item_id.as_str()).or_insert_with(|| {
            items.push(r.item_id.clone());
            obs.push(Vec::new());
            items.len() - 1
        });
        let a = *ann_idx.entry(r.annotator_id.as_str()).or_insert_with(|| {
            annotators.push(r.annotator_id.clone());
            annotators.len() - 1
        });
        obs[i].push((a, r.label));
    }
    Indexed { items, annotators, obs }
}

/// Fit on every item present in `matrix`.
pub fn dawid_skene_fit(matrix: &AnnotationMatrix, config: &DawidSkeneConfig) -> Result<DawidSkeneModel> {
    if matrix.is_empty() {
        return Err(Error::Data("annotation matrix has no records".into()));
    }
    if config.max_iter == 0 || !(config.tol > 0.0) {
        return Err(Error::config("max_iter must be >= 1 and tol > 0"));
    }
    fit_indexed(index(matrix), matrix, config)
}

/// Fit, requiring every id in `item_ids` to have at least one record.
pub fn dawid_skene_fit_for_items(
    matrix: &AnnotationMatrix,
    item_ids: &[String],
    config: &DawidSkeneConfig,
) -> Result<DawidSkeneModel> {
    let present: std::collections::HashSet<&str> = matrix.records.iter().map(|r| r.item_id.as_str()).collect();
    if let Some(missing) = item_ids.iter().find(|id| !present.contains(id.as_str())) {
        return Err(Error::Data(format!("item {missing} has no annotation records")));
    }
    dawid_skene_fit(matrix, config)
}

fn fit_indexed(ix: Indexed, matrix: &AnnotationMatrix, config: &DawidSkeneConfig) -> Result<DawidSkeneModel> {
    let k = matrix.k();
    let n_items = ix.items.len();
    let n_ann = ix.annotators.len();

    // majority-vote soft initialization
    let mut post: Vec<Vec<f64>> = ix
        .obs
        .iter()
        .map(|o| {
            let mut t = vec![0.0; k];
            for &(_, l) in o {
                t[l] += 1.0;
            }
            let n = o.len() as f64;
            t.iter_mut().for_each(|v| *v /= n);
            t
        })
        .collect();

    let mut prior = vec![0.0; k];
    let mut confusion = vec![vec![vec![0.0; k]; k]; n_ann];
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..config.max_iter {
        iterations += 1;
        m_step(&post, &ix.obs, &mut prior, &mut confusion);
        let (next, loglik) = e_step(&ix.obs, &prior, &confusion);
        trace.push(loglik);
        let delta = post
            .iter()
            .zip(&next)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max);
        post = next;
        if delta < config.tol {
            converged = true;
            break;
        }
    }

    let posteriors = post
        .into_iter()
        .map(|p| LabelDistribution::from_weights(&p))
        .collect::<Result<Vec<_>>>()?;
    debug_assert_eq!(posteriors.len(), n_items);
    Ok(DawidSkeneModel {
        item_ids: ix.items,
        annotator_ids: ix.annotators,
        class_names: matrix.class_names.clone(),
        posteriors,
        confusion,
        class_prior: LabelDistribution::from_weights(&prior)?,
        loglik_trace: trace,
        iterations_run: iterations,
        converged,
        config: *config,
    })
}

fn m_step(post: &[Vec<f64>], obs: &[Vec<(usize, usize)>], prior: &mut [f64], confusion: &mut [Vec<Vec<f64>>]) {
    let k = prior.len();
    let n = post.len() as f64;
    for (c, p) in prior.iter_mut().enumerate() {
        *p = post.iter().map(|t| t[c]).sum::<f64>() / n;
    }
    for rows in confusion.iter_mut() {
        for row in rows.iter_mut() {
            row.iter_mut().for_each(|v| *v = CONFUSION_SMOOTHING);
        }
    }
    for (t, o) in post.iter().zip(obs) {
        for &(a, l) in o {
            for c in 0..k {
                confusion[a][c][l] += t[c];
            }
        }
    }
    for rows in confusion.iter_mut() {
        for row in rows.iter_mut() {
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= s);
        }
    }
}

fn e_step(obs: &[Vec<(usize, usize)>], prior: &[f64], confusion: &[Vec<Vec<f64>>]) -> (Vec<Vec<f64>>, f64) {
    let k = prior.len();
    let mut loglik = 0.0;
    let post = obs
        .iter()
        .map(|o| {
            let mut lp: Vec<f64> = (0..k)
                .map(|c| {
                    let base = if prior[c] > 0.0 { prior[c].ln() } else { f64::NEG_INFINITY };
                    o.iter().fold(base, |acc, &(a, l)| acc + confusion[a][c][l].ln())
                })
                .collect();
            let m = lp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let s: f64 = lp.iter().map(|v| (v - m).exp()).sum();
            loglik += m + s.ln();
            lp.iter_mut().for_each(|v| *v = (*v - m).exp() / s);
            lp
        })
        .collect();
    (post, loglik)
}

/// Posterior label distributions, one per item, in fit order.
pub fn ds_soft_targets(model: &DawidSkeneModel) -> Vec<(String, LabelDistribution)> {
    model.item_ids.iter().cloned().zip(model.posteriors.iter().cloned()).collect()
}
