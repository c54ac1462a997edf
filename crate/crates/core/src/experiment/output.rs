//! CSV tables, JSON manifests and plot-data files for each runner.
//!
//! Rows are emitted in a fixed order and floats with fixed precision, so
//! identical runs produce byte-identical files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

use super::comparison::ComparisonReport;
use super::config::ExperimentConfig;
use super::curve::{CurveReport, SweepReport, CURVE_METRICS};
use super::ds::{DsReport, LabelMethod};
use super::heldout::HeldOutReport;
use super::run::RunResult;
use super::summary::{MeanSd, Metric};

fn f(x: f64) -> String {
    format!("{x:.6}")
}

fn opt(x: Option<f64>) -> String {
    x.map(f).unwrap_or_default()
}

fn table(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn metric_header(prefix: &[&str], metrics: &[Metric]) -> Vec<String> {
    let mut h: Vec<String> = prefix.iter().map(|s| s.to_string()).collect();
    for m in metrics {
        h.push(format!("{}_mean", m.name()));
        h.push(format!("{}_sd", m.name()));
    }
    h
}

fn metric_cells(map: &std::collections::BTreeMap<Metric, MeanSd>, metrics: &[Metric]) -> Vec<String> {
    metrics
        .iter()
        .flat_map(|m| match map.get(m) {
            Some(v) => [f(v.mean), f(v.sd)],
            None => [String::new(), String::new()],
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    experiment: &'a str,
    kind: &'a str,
    model_tag: &'a str,
    tool_version: &'a str,
    config: &'a ExperimentConfig,
    files: Vec<String>,
    warnings: &'a [String],
}

fn manifest(dir: &Path, cfg: &ExperimentConfig, kind: &str, tag: &str, files: &[&str], warnings: &[String]) -> Result<PathBuf> {
    let path = dir.join("manifest.json");
    json(
        &path,
        &Manifest {
            experiment: &cfg.name,
            kind,
            model_tag: tag,
            tool_version: env!("CARGO_PKG_VERSION"),
            config: cfg,
            files: files.iter().map(|s| s.to_string()).collect(),
            warnings,
        },
    )?;
    Ok(path)
}

pub fn write_runs(path: &Path, runs: &[RunResult]) -> Result<()> {
    let mut header: Vec<String> = [
        "config_id",
        "model_seed",
        "subsample_seed",
        "n_annotators",
        "temperature_scaled",
        "temperature",
        "best_epoch",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(Metric::ALL.iter().map(|m| m.name().to_string()));
    header.extend(["rel", "res", "unc"].iter().map(|s| s.to_string()));
    let rows: Vec<Vec<String>> = runs
        .iter()
        .map(|r| {
            let mut row = vec![
                r.config_id.clone(),
                r.model_seed.to_string(),
                r.subsample_seed.map(|s| s.to_string()).unwrap_or_default(),
                r.n_annotators.map(|s| s.to_string()).unwrap_or_default(),
                r.temperature_scaled.to_string(),
                f(r.temperature),
                r.best_epoch.to_string(),
            ];
            row.extend(Metric::ALL.iter().map(|m| opt(m.get(&r.metrics))));
            match &r.decomposition {
                Some(d) => row.extend([f(d.rel), f(d.res), f(d.unc)]),
                None => row.extend([String::new(), String::new(), String::new()]),
            }
            row
        })
        .collect();
    table(path, &header, &rows)
}

pub fn write_comparison(dir: &Path, cfg: &ExperimentConfig, rep: &ComparisonReport) -> Result<()> {
    ensure_dir(dir)?;
    let mut header = metric_header(&["config_id", "temperature_scaled", "n_seeds", "temperature"], &Metric::ALL);
    header.push("model".into());
    let rows: Vec<Vec<String>> = rep
        .summaries
        .iter()
        .map(|s| {
            let mut r = vec![
                s.config_id.clone(),
                s.temperature_scaled.to_string(),
                s.n_seeds.to_string(),
                f(s.temperature.mean),
            ];
            r.extend(metric_cells(&s.metrics, &Metric::ALL));
            r.push(rep.model_tag.clone());
            r
        })
        .collect();
    table(&dir.join("comparison.csv"), &header, &rows)?;

    let header: Vec<String> = [
        "metric", "config_a", "config_b", "mean_diff", "t", "df", "p", "p_holm", "reject", "cohens_d", "sided",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let rows: Vec<Vec<String>> = rep
        .tests
        .iter()
        .map(|t| {
            vec![
                t.metric.name().into(),
                t.config_a.clone(),
                t.config_b.clone(),
                f(t.mean_diff),
                f(t.t),
                t.df.to_string(),
                format!("{:.6e}", t.p),
                format!("{:.6e}", t.p_holm),
                t.reject.to_string(),
                opt(t.cohens_d),
                format!("{:?}", t.sided).to_lowercase(),
            ]
        })
        .collect();
    table(&dir.join("tests.csv"), &header, &rows)?;

    let header: Vec<String> = ["config_id", "metric", "low", "medium", "high", "n_low", "n_medium", "n_high"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows: Vec<Vec<String>> = rep
        .terciles
        .iter()
        .map(|t| {
            vec![
                t.config_id.clone(),
                serde_json::to_value(t.kind)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_string))
                    .unwrap_or_default(),
                f(t.values[0]),
                f(t.values[1]),
                f(t.values[2]),
                t.counts[0].to_string(),
                t.counts[1].to_string(),
                t.counts[2].to_string(),
            ]
        })
        .collect();
    table(&dir.join("terciles.csv"), &header, &rows)?;

    let header: Vec<String> = ["config_id", "temperature_scaled", "rel", "res", "unc", "brier_soft", "residual"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows: Vec<Vec<String>> = rep
        .decomposition
        .iter()
        .map(|d| {
            vec![
                d.config_id.clone(),
                d.temperature_scaled.to_string(),
                f(d.rel),
                f(d.res),
                f(d.unc),
                f(d.brier_soft),
                format!("{:.3e}", d.residual),
            ]
        })
        .collect();
    table(&dir.join("decomposition.csv"), &header, &rows)?;
    write_runs(&dir.join("runs.csv"), &rep.runs)?;
    manifest(
        dir,
        cfg,
        "comparison",
        &rep.model_tag,
        &["comparison.csv", "tests.csv", "terciles.csv", "decomposition.csv", "runs.csv"],
        &rep.warnings,
    )?;
    Ok(())
}

pub fn write_curve(dir: &Path, cfg: &ExperimentConfig, rep: &CurveReport) -> Result<()> {
    ensure_dir(dir)?;
    let mut header = metric_header(&["n"], &CURVE_METRICS);
    for m in CURVE_METRICS {
        header.push(format!("pct_{}", m.name()));
        header.push(format!("pct_{}_seed_mean", m.name()));
        header.push(format!("pct_{}_seed_sd", m.name()));
    }
    let mut rows = Vec::new();
    for (label, map) in [("hard", &rep.hard), ("full", &rep.full)] {
        let mut r = vec![label.to_string()];
        r.extend(metric_cells(map, &CURVE_METRICS));
        let pct = if label == "hard" { 0.0 } else { 100.0 };
        for _ in CURVE_METRICS {
            r.extend([f(pct), String::new(), String::new()]);
        }
        rows.push(r);
    }
    for p in &rep.points {
        let mut r = vec![p.n.to_string()];
        r.extend(metric_cells(&p.metrics, &CURVE_METRICS));
        for m in CURVE_METRICS {
            r.push(opt(p.pct_of_means.get(&m).copied()));
            match p.pct_by_seed.get(&m) {
                Some(v) => r.extend([f(v.mean), f(v.sd)]),
                None => r.extend([String::new(), String::new()]),
            }
        }
        rows.push(r);
    }
    table(&dir.join("curve.csv"), &header, &rows)?;

    let header: Vec<String> = [
        "n", "gap_mean", "gap_sd", "t", "df", "p_one_sided", "p_holm_one_sided", "p_two_sided",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let rows: Vec<Vec<String>> = rep
        .gap_tests
        .iter()
        .map(|g| {
            vec![
                g.n.to_string(),
                f(g.gap.mean),
                f(g.gap.sd),
                opt(g.one_sided.as_ref().map(|t| t.t)),
                g.one_sided.as_ref().map(|t| t.df.to_string()).unwrap_or_default(),
                g.one_sided.as_ref().map(|t| format!("{:.6e}", t.p)).unwrap_or_default(),
                g.p_holm_one_sided.map(|p| format!("{p:.6e}")).unwrap_or_default(),
                g.two_sided.as_ref().map(|t| format!("{:.6e}", t.p)).unwrap_or_default(),
            ]
        })
        .collect();
    table(&dir.join("gap_tests.csv"), &header, &rows)?;

    let mut files = vec!["curve.csv".to_string(), "gap_tests.csv".to_string(), "runs.csv".to_string()];
    for m in [Metric::MeanKl, Metric::EntropyPearson] {
        let name = format!("pct_{}.dat", m.name());
        let path = dir.join(&name);
        let mut out = String::from("# n pct sd\n");
        for p in &rep.points {
            if let Some(v) = p.pct_by_seed.get(&m) {
                out.push_str(&format!("{} {} {}\n", p.n, f(v.mean), f(v.sd)));
            }
        }
        fs::write(&path, out).map_err(|e| Error::io(&path, e))?;
        files.push(name);
    }
    write_runs(&dir.join("runs.csv"), &rep.runs)?;
    let refs: Vec<&str> = files.iter().map(String::as_str).collect();
    manifest(dir, cfg, "efficiency_curve", &rep.model_tag, &refs, &rep.warnings)?;
    Ok(())
}

pub fn write_sweep(dir: &Path, cfg: &ExperimentConfig, rep: &SweepReport) -> Result<()> {
    ensure_dir(dir)?;
    let header = metric_header(&["n", "target", "alpha"], &Metric::ALL);
    let rows: Vec<Vec<String>> = rep
        .rows
        .iter()
        .map(|r| {
            let mut row = vec![r.n.to_string(), r.target.clone(), opt(r.alpha)];
            row.extend(metric_cells(&r.metrics, &Metric::ALL));
            row
        })
        .collect();
    table(&dir.join("dirichlet_sweep.csv"), &header, &rows)?;
    write_runs(&dir.join("runs.csv"), &rep.runs)?;
    manifest(dir, cfg, "dirichlet_sweep", &rep.model_tag, &["dirichlet_sweep.csv", "runs.csv"], &[])?;
    Ok(())
}

pub fn write_ds(dir: &Path, cfg: Option<&ExperimentConfig>, rep: &DsReport) -> Result<()> {
    ensure_dir(dir)?;
    let method = |m: LabelMethod| match m {
        LabelMethod::Raw => "raw",
        LabelMethod::Ds => "ds",
    };
    let header: Vec<String> = [
        "n", "method", "kl_mean", "kl_sd", "jsd_mean", "jsd_sd", "entropy_r_mean", "entropy_r_sd", "n_skipped",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let rows: Vec<Vec<String>> = rep
        .summaries
        .iter()
        .map(|s| {
            vec![
                s.n.to_string(),
                method(s.method).into(),
                f(s.mean_kl.mean),
                f(s.mean_kl.sd),
                f(s.mean_jsd.mean),
                f(s.mean_jsd.sd),
                opt(s.entropy_r.map(|v| v.mean)),
                opt(s.entropy_r.map(|v| v.sd)),
                s.n_skipped.to_string(),
            ]
        })
        .collect();
    table(&dir.join("ds_comparison.csv"), &header, &rows)?;
    json(&dir.join("ds_runs.json"), &rep.rows)?;
    if let Some(cfg) = cfg {
        manifest(dir, cfg, "ds_comparison", "", &["ds_comparison.csv", "ds_runs.json"], &[])?;
    }
    Ok(())
}

pub fn write_held_out(dir: &Path, cfg: &ExperimentConfig, rep: &HeldOutReport) -> Result<()> {
    ensure_dir(dir)?;
    let header = metric_header(&["config_id", "temperature_scaled", "n_train", "n_eval"], &Metric::ALL);
    let rows: Vec<Vec<String>> = rep
        .summaries
        .iter()
        .map(|s| {
            let mut row = vec![
                s.config_id.clone(),
                s.temperature_scaled.to_string(),
                rep.n_train.to_string(),
                rep.n_eval.to_string(),
            ];
            row.extend(metric_cells(&s.metrics, &Metric::ALL));
            row
        })
        .collect();
    table(&dir.join("held_out.csv"), &header, &rows)?;
    let runs: Vec<RunResult> = rep.splits.iter().flat_map(|(_, r)| r.runs.iter().cloned()).collect();
    write_runs(&dir.join("runs.csv"), &runs)?;
    let tag = rep.splits.first().map(|(_, r)| r.model_tag.as_str()).unwrap_or("");
    manifest(dir, cfg, "held_out", tag, &["held_out.csv", "runs.csv"], &[])?;
    Ok(())
}

/// Write a short plain-text digest of whichever reports exist in `dir`.
pub fn write_digest(dir: &Path, lines: &[String]) -> Result<()> {
    let path = dir.join("report.txt");
    let mut file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    for l in lines {
        writeln!(file, "{l}").map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
