//! Raw-count soft labels against Dawid-Skene posteriors, both built from N
//! subsampled annotator records per item and scored against the full-pool
//! raw distribution.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dawid_skene::{dawid_skene_fit, DawidSkeneConfig};
use crate::error::{Error, Result};
use crate::ingest::{AnnotationMatrix, AnnotationRecord};
use crate::metrics::{entropy_correlation, mean_jsd, mean_kl, CorrelationMethod};
use crate::rng::SplitMix64;
use crate::simplex::{EvalPair, LabelDistribution};

use super::summary::{thread_pool, MeanSd};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelMethod {
    Raw,
    Ds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DsRow {
    pub n: u64,
    pub seed: u64,
    pub method: LabelMethod,
    pub mean_kl: f64,
    pub mean_jsd: f64,
    pub entropy_r: Option<f64>,
    pub n_items: usize,
    /// Items with fewer than N records, left out at this N.
    pub n_skipped: usize,
    pub ds_iterations: Option<usize>,
    pub ds_converged: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DsSummary {
    pub n: u64,
    pub method: LabelMethod,
    pub mean_kl: MeanSd,
    pub mean_jsd: MeanSd,
    pub entropy_r: Option<MeanSd>,
    pub n_skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DsReport {
    pub rows: Vec<DsRow>,
    pub summaries: Vec<DsSummary>,
}

impl DsReport {
    pub fn summary(&self, n: u64, method: LabelMethod) -> Option<&DsSummary> {
        self.summaries.iter().find(|s| s.n == n && s.method == method)
    }
}

fn distribution(records: &[&AnnotationRecord], k: usize) -> Result<LabelDistribution> {
    let mut c = vec![0.0; k];
    for r in records {
        c[r.label] += 1.0;
    }
    LabelDistribution::from_weights(&c)
}

/// `(item id, records sorted by annotator id)` in item-id order.
fn grouped(matrix: &AnnotationMatrix) -> Vec<(String, Vec<&AnnotationRecord>)> {
    let mut by: BTreeMap<&str, Vec<&AnnotationRecord>> = BTreeMap::new();
    for r in &matrix.records {
        by.entry(r.item_id.as_str()).or_default().push(r);
    }
    by.into_iter()
        .map(|(id, mut recs)| {
            recs.sort_by(|a, b| a.annotator_id.cmp(&b.annotator_id));
            (id.to_string(), recs)
        })
        .collect()
}

fn score(
    items: &[(String, LabelDistribution)],
    labels: &[LabelDistribution],
) -> Result<(f64, f64, Option<f64>)> {
    let pairs = items
        .iter()
        .zip(labels)
        .map(|((id, r), l)| EvalPair::new(id.clone(), r.clone(), l.clone()))
        .collect::<Result<Vec<_>>>()?;
    let r = match entropy_correlation(&pairs, CorrelationMethod::Pearson) {
        Ok(r) => Some(r),
        Err(Error::DegenerateVariance(_)) | Err(Error::Data(_)) => None,
        Err(e) => return Err(e),
    };
    Ok((mean_kl(&pairs)?, mean_jsd(&pairs)?, r))
}

fn one_cell(
    groups: &[(String, Vec<&AnnotationRecord>)],
    reference: &[LabelDistribution],
    class_names: &[String],
    n: u64,
    seed: u64,
    ds: &DawidSkeneConfig,
) -> Result<[DsRow; 2]> {
    let k = class_names.len();
    let mut kept: Vec<(String, LabelDistribution)> = Vec::new();
    let mut raw = Vec::new();
    let mut sub_records = Vec::new();
    let mut skipped = 0;
    for (i, ((id, recs), refd)) in groups.iter().zip(reference).enumerate() {
        if (recs.len() as u64) < n {
            skipped += 1;
            continue;
        }
        let mut order: Vec<usize> = (0..recs.len()).collect();
        SplitMix64::derive(seed, i as u64).shuffle(&mut order);
        let chosen: Vec<&AnnotationRecord> = order[..n as usize].iter().map(|&j| recs[j]).collect();
        raw.push(distribution(&chosen, k)?);
        sub_records.extend(chosen.into_iter().cloned());
        kept.push((id.clone(), refd.clone()));
    }
    if kept.len() < 3 {
        return Err(Error::Data(format!("only {} items have at least {n} annotations", kept.len())));
    }
    let sub = AnnotationMatrix::new(sub_records, class_names.to_vec())?;
    let model = dawid_skene_fit(&sub, &DawidSkeneConfig { seed, ..*ds })?;
    let post: BTreeMap<&str, &LabelDistribution> = model
        .item_ids
        .iter()
        .map(String::as_str)
        .zip(&model.posteriors)
        .collect();
    let ds_labels: Vec<LabelDistribution> = kept.iter().map(|(id, _)| post[id.as_str()].clone()).collect();

    let (kl, jsd, r) = score(&kept, &raw)?;
    let (dkl, djsd, dr) = score(&kept, &ds_labels)?;
    let row = |method, mean_kl, mean_jsd, entropy_r, it: Option<usize>, conv: Option<bool>| DsRow {
        n,
        seed,
        method,
        mean_kl,
        mean_jsd,
        entropy_r,
        n_items: kept.len(),
        n_skipped: skipped,
        ds_iterations: it,
        ds_converged: conv,
    };
    Ok([
        row(LabelMethod::Raw, kl, jsd, r, None, None),
        row(
            LabelMethod::Ds,
            dkl,
            djsd,
            dr,
            Some(model.iterations_run),
            Some(model.converged),
        ),
    ])
}

pub fn run_ds_comparison(
    matrix: &AnnotationMatrix,
    n_grid: &[u64],
    seeds: &[u64],
    ds: &DawidSkeneConfig,
    workers: Option<usize>,
) -> Result<DsReport> {
    if matrix.is_empty() {
        return Err(Error::Data("annotation matrix has no records".into()));
    }
    if seeds.is_empty() || n_grid.is_empty() || n_grid.contains(&0) {
        return Err(Error::config("need at least one seed and a grid of N >= 1"));
    }
    let k = matrix.k();
    let groups = grouped(matrix);
    let reference = groups
        .iter()
        .map(|(_, recs)| distribution(recs, k))
        .collect::<Result<Vec<_>>>()?;
    let cells: Vec<(u64, u64)> = n_grid
        .iter()
        .flat_map(|&n| seeds.iter().map(move |&s| (n, s)))
        .collect();
    let pool = thread_pool(workers)?;
    let rows: Vec<DsRow> = pool
        .install(|| {
            cells
                .par_iter()
                .map(|&(n, s)| one_cell(&groups, &reference, &matrix.class_names, n, s, ds))
                .collect::<Result<Vec<_>>>()
        })?
        .into_iter()
        .flatten()
        .collect();

    let mut summaries = Vec::new();
    for &n in n_grid {
        for method in [LabelMethod::Raw, LabelMethod::Ds] {
            let sel: Vec<&DsRow> = rows.iter().filter(|r| r.n == n && r.method == method).collect();
            let col = |f: &dyn Fn(&DsRow) -> f64| MeanSd::of(&sel.iter().map(|r| f(r)).collect::<Vec<_>>());
            let r: Option<Vec<f64>> = sel.iter().map(|r| r.entropy_r).collect();
            summaries.push(DsSummary {
                n,
                method,
                mean_kl: col(&|r| r.mean_kl),
                mean_jsd: col(&|r| r.mean_jsd),
                entropy_r: r.map(|v| MeanSd::of(&v)),
                n_skipped: sel[0].n_skipped,
            });
        }
    }
    Ok(DsReport { rows, summaries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modelkit::{generate_rater_matrix, RaterPoolSpec};

    #[test]
    fn unanimous_raters_give_no_gap() {
        let ids: Vec<String> = (0..30).map(|i| format!("i{i:02}")).collect();
        let dists: Vec<_> = (0..30).map(|i| LabelDistribution::one_hot(i % 3, 3)).collect();
        let m = generate_rater_matrix(
            &ids,
            &dists,
            &RaterPoolSpec {
                n_raters: 10,
                raters_per_item: 10,
                noisy_raters: 0,
                seed: 1,
            },
        )
        .unwrap();
        let rep = run_ds_comparison(&m, &[3, 10], &[1, 2], &DawidSkeneConfig::default(), Some(2)).unwrap();
        for n in [3, 10] {
            let raw = rep.summary(n, LabelMethod::Raw).unwrap();
            let ds = rep.summary(n, LabelMethod::Ds).unwrap();
            assert!(raw.mean_kl.mean < 1e-9 && ds.mean_kl.mean < 1e-6);
        }
    }

    #[test]
    fn full_pool_raw_matches_reference() {
        let ids: Vec<String> = (0..20).map(|i| format!("i{i:02}")).collect();
        let dists = vec![LabelDistribution::new(vec![0.5, 0.3, 0.2]).unwrap(); 20];
        let m = generate_rater_matrix(
            &ids,
            &dists,
            &RaterPoolSpec {
                n_raters: 8,
                raters_per_item: 8,
                noisy_raters: 0,
                seed: 2,
            },
        )
        .unwrap();
        let rep = run_ds_comparison(&m, &[8], &[5], &DawidSkeneConfig::default(), Some(1)).unwrap();
        assert!(rep.summary(8, LabelMethod::Raw).unwrap().mean_kl.mean < 1e-10);
    }

    #[test]
    fn short_items_are_skipped() {
        let mut recs = Vec::new();
        for i in 0..5 {
            for a in 0..(if i == 0 { 2 } else { 4 }) {
                recs.push(AnnotationRecord {
                    item_id: format!("i{i}"),
                    annotator_id: format!("a{a}"),
                    label: (i + a) % 2,
                });
            }
        }
        let m = AnnotationMatrix::new(recs, vec!["x".into(), "y".into()]).unwrap();
        let rep = run_ds_comparison(&m, &[3], &[0], &DawidSkeneConfig::default(), Some(1)).unwrap();
        assert_eq!(rep.rows[0].n_skipped, 1);
        assert_eq!(rep.rows[0].n_items, 4);
    }
}
