use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use labeldist::dawid_skene::{dawid_skene_fit, ds_soft_targets, DawidSkeneConfig};
use labeldist::experiment::output::{
    write_comparison, write_curve, write_digest, write_ds, write_held_out, write_sweep,
};
use labeldist::experiment::run::score;
use labeldist::experiment::{
    prepare_from_config, run_comparison, run_dirichlet_sweep, run_ds_comparison, run_efficiency_curve,
    run_held_out, run_single, ExperimentConfig, RaterSource,
};
use labeldist::ingest::{
    collapse_to_counts, load_predictions, parse_counts_jsonl, parse_long_csv, store_predictions,
    stratified_split, write_counts_jsonl, AnnotationMatrix, Dataset, FieldMap, LongCsvSchema,
};
use labeldist::metrics::{tercile_stratified, MetricKind};
use labeldist::modelkit::{generate_rater_matrix, generate_synthetic};
use labeldist::targets::TargetSpec;
use labeldist::{Error, EvalPair, Result};

#[derive(Parser)]
#[command(name = "labeldist", version, about = "Crowd-label training targets and distribution-aware evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Normalize annotations (counts JSONL or long CSV) into a counts JSONL.
    Ingest(IngestArgs),
    /// Stratified train/val/test split by plurality label.
    Split(SplitArgs),
    /// Build per-item training targets.
    Targets(TargetsArgs),
    /// Train one model and store its test predictions.
    Train(TrainArgs),
    /// Score stored predictions against human counts.
    Evaluate(EvaluateArgs),
    /// Hard vs label smoothing vs soft, over several model seeds.
    Compare(CompareArgs),
    /// Annotation-efficiency curve over the N grid.
    Curve(ExperimentArgs),
    /// Raw-count soft labels vs Dawid-Skene posteriors.
    DsCompare(DsArgs),
    /// Dirichlet-smoothed targets over the N and alpha grids.
    DirichletSweep(ExperimentArgs),
    /// Collect report digests from output directories.
    Report(ReportArgs),
}

#[derive(Args)]
struct CountsInput {
    /// Counts JSONL.
    #[arg(long, conflicts_with = "long")]
    counts: Option<PathBuf>,
    /// JSON field map for the counts file; defaults to the ChaosNLI layout.
    #[arg(long)]
    fields: Option<PathBuf>,
    /// Long-format CSV with one row per (item, rater, label).
    #[arg(long)]
    long: Option<PathBuf>,
    /// Class names in order, comma separated; required with --long.
    #[arg(long, value_delimiter = ',')]
    classes: Vec<String>,
    #[arg(long, default_value = "item_id")]
    item_column: String,
    #[arg(long, default_value = "rater_id")]
    rater_column: String,
    #[arg(long, default_value = "label")]
    label_column: String,
}

impl CountsInput {
    fn schema(&self) -> Result<LongCsvSchema> {
        if self.classes.is_empty() {
            return Err(Error::Config("--classes is required with --long".into()));
        }
        Ok(LongCsvSchema {
            item_column: self.item_column.clone(),
            rater_column: self.rater_column.clone(),
            label_column: self.label_column.clone(),
            class_names: self.classes.clone(),
        })
    }

    fn matrix(&self) -> Result<Option<AnnotationMatrix>> {
        match &self.long {
            Some(p) => Ok(Some(parse_long_csv(p, &self.schema()?)?)),
            None => Ok(None),
        }
    }

    fn dataset(&self) -> Result<Dataset> {
        if let Some(m) = self.matrix()? {
            return collapse_to_counts(&m);
        }
        let Some(path) = &self.counts else {
            return Err(Error::Config("give --counts or --long".into()));
        };
        let fields = match &self.fields {
            Some(p) => read_json::<FieldMap>(p)?,
            None => FieldMap::default(),
        };
        parse_counts_jsonl(path, &fields)
    }
}

#[derive(Args)]
struct IngestArgs {
    #[command(flatten)]
    input: CountsInput,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SplitArgs {
    #[command(flatten)]
    input: CountsInput,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_values_t = [0.7, 0.15, 0.15])]
    ratios: Vec<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Hard,
    Smoothed,
    Soft,
    Dirichlet,
    /// Dawid-Skene posteriors; needs --long.
    Ds,
}

#[derive(Args)]
struct TargetsArgs {
    #[command(flatten)]
    input: CountsInput,
    #[arg(long, value_enum)]
    mode: Mode,
    /// Smoothing intensity or Dirichlet pseudo-count.
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    /// Subsample this many annotators per item first.
    #[arg(long)]
    n: Option<u64>,
    #[arg(long, default_value_t = 100)]
    seed: u64,
    /// Output JSONL; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment config JSON.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Override the config's worker count.
    #[arg(long)]
    workers: Option<usize>,
}

impl ExperimentArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if self.workers.is_some() {
            cfg.workers = self.workers;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    /// Also run held-out annotator evaluation, e.g. `80:20`.
    #[arg(long, value_parser = parse_pool_split)]
    held_out: Option<(u64, u64)>,
}

fn parse_pool_split(s: &str) -> std::result::Result<(u64, u64), String> {
    let (a, b) = s.split_once(':').ok_or("expected TRAIN:EVAL")?;
    Ok((a.parse().map_err(|e| format!("{e}"))?, b.parse().map_err(|e| format!("{e}"))?))
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    #[arg(long, value_enum, default_value = "soft")]
    mode: Mode,
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long, default_value_t = 100)]
    subsample_seed: u64,
    #[arg(long, default_value_t = 42)]
    model_seed: u64,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    input: CountsInput,
    /// Predictions JSONL as written by `train`.
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long, default_value_t = labeldist::metrics::DEFAULT_BINS)]
    bins: usize,
    /// Output JSON; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DsArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

#[derive(Args)]
struct ReportArgs {
    /// Directories written by the experiment subcommands.
    #[arg(required = true)]
    dirs: Vec<PathBuf>,
    /// Also write the combined digest to DIR/report.txt.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::Data(format!("{}: {e}", dir.display())))?;
    }
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

fn target_spec(mode: Mode, alpha: f64, n: Option<u64>, seed: u64) -> Result<TargetSpec> {
    let t = match mode {
        Mode::Hard => TargetSpec::hard(),
        Mode::Smoothed => TargetSpec::smoothed(alpha),
        Mode::Soft => TargetSpec::soft(),
        Mode::Dirichlet => TargetSpec::dirichlet(alpha),
        Mode::Ds => return Err(Error::Config("ds targets are not a training mode here".into())),
    };
    let t = match n {
        Some(n) => t.subsampled(n, seed),
        None => t,
    };
    t.validate()?;
    Ok(t)
}

fn ingest(a: IngestArgs) -> Result<()> {
    let ds = a.input.dataset()?;
    write_counts_jsonl(&ds, &a.out)?;
    println!(
        "{} items, {} classes, {} annotations -> {}",
        ds.len(),
        ds.k(),
        ds.total_annotations(),
        a.out.display()
    );
    Ok(())
}

fn split(a: SplitArgs) -> Result<()> {
    let ratios: [f64; 3] = a
        .ratios
        .as_slice()
        .try_into()
        .map_err(|_| Error::Config("--ratios needs three values".into()))?;
    let ds = a.input.dataset()?;
    let s = stratified_split(&ds, ratios, a.seed)?;
    s.save(&a.out)?;
    let (tr, va, te) = s.sizes();
    println!("train {tr}, val {va}, test {te} -> {}", a.out.display());
    Ok(())
}

fn targets(a: TargetsArgs) -> Result<()> {
    let rows: Vec<(String, Vec<f64>)> = match a.mode {
        Mode::Ds => {
            let m = a
                .input
                .matrix()?
                .ok_or_else(|| Error::Config("ds targets need --long".into()))?;
            let model = dawid_skene_fit(&m, &DawidSkeneConfig::default())?;
            if !model.converged {
                log::warn!("Dawid-Skene stopped after {} iterations without converging", model.iterations_run);
            }
            ds_soft_targets(&model)
                .into_iter()
                .map(|(id, d)| (id, d.into_inner()))
                .collect()
        }
        mode => {
            let ds = a.input.dataset()?;
            let spec = target_spec(mode, a.alpha, a.n, a.seed)?;
            ds.items
                .iter()
                .enumerate()
                .map(|(i, it)| Ok((it.item_id.clone(), spec.build(&it.counts, i as u64)?.into_inner())))
                .collect::<Result<_>>()?
        }
    };
    let mut out: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(std::io::BufWriter::new(
            fs::File::create(p).map_err(|e| Error::Data(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    };
    for (id, t) in rows {
        let line = serde_json::json!({ "item_id": id, "target": t });
        writeln!(out, "{line}").map_err(|e| Error::Data(e.to_string()))?;
    }
    out.flush().map_err(|e| Error::Data(e.to_string()))
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let cfg = a.exp.load()?;
    let prep = prepare_from_config(&cfg)?;
    let target = target_spec(a.mode, a.alpha, a.n, a.subsample_seed)?;
    let run = run_single(&prep, &target.label(), &target, a.model_seed, &cfg.model, cfg.n_bins)?;
    let dir = &a.exp.out;
    fs::create_dir_all(dir).map_err(|e| Error::Data(format!("{}: {e}", dir.display())))?;
    store_predictions(&run.predictions(false), dir.join("predictions.jsonl"))?;
    store_predictions(&run.predictions(true), dir.join("predictions_ts.jsonl"))?;
    write_json(&dir.join("model.json"), &run.model)?;
    write_json(&dir.join("trace.json"), &run.trace)?;
    write_json(&dir.join("result.json"), &[&run.raw, &run.scaled])?;
    println!(
        "{} seed {}: best epoch {}, T = {:.4}, test KL {:.4} (raw) {:.4} (scaled)",
        run.raw.config_id,
        a.model_seed,
        run.raw.best_epoch,
        run.scaled.temperature,
        run.raw.metrics.mean_kl,
        run.scaled.metrics.mean_kl
    );
    Ok(())
}

fn evaluate_cmd(a: EvaluateArgs) -> Result<()> {
    let ds = a.input.dataset()?;
    let preds = load_predictions(&a.predictions)?;
    let by_id = preds.by_id();
    let mut ids = Vec::new();
    let mut counts = Vec::new();
    let mut pairs = Vec::new();
    for item in &ds.items {
        let Some(p) = by_id.get(item.item_id.as_str()) else {
            continue;
        };
        ids.push(item.item_id.clone());
        counts.push(item.counts.clone());
        let human = labeldist::simplex::normalize_counts(&item.counts);
        pairs.push(EvalPair::new(item.item_id.clone(), human, p.probs.clone())?);
    }
    if pairs.len() < preds.len() {
        return Err(Error::Data(format!(
            "{} predictions have no matching item in the counts file",
            preds.len() - pairs.len()
        )));
    }
    let block = labeldist::experiment::Block {
        ids,
        x: Vec::new(),
        counts,
        index: Vec::new(),
    };
    let (metrics, decomposition) = score(&block, &pairs, a.bins)?;
    let terciles = [MetricKind::Accuracy, MetricKind::MeanKl, MetricKind::MeanJsd]
        .into_iter()
        .map(|k| tercile_stratified(&pairs, k))
        .collect::<Result<Vec<_>>>()?;
    let report = serde_json::json!({
        "metrics": metrics,
        "decomposition": decomposition,
        "terciles": terciles,
    });
    match &a.out {
        Some(p) => write_json(p, &report),
        None => {
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
    }
}

fn compare(a: CompareArgs) -> Result<()> {
    let cfg = a.exp.load()?;
    let prep = prepare_from_config(&cfg)?;
    let (rep, _) = run_comparison(&prep, &cfg)?;
    write_comparison(&a.exp.out, &cfg, &rep)?;
    let mut lines = vec![format!("comparison ({})", rep.model_tag)];
    for s in rep.summaries.iter().filter(|s| !s.temperature_scaled) {
        let m = |k: labeldist::experiment::Metric| {
            s.metrics.get(&k).map(|v| format!("{:.4}±{:.4}", v.mean, v.sd)).unwrap_or("-".into())
        };
        lines.push(format!(
            "  {:<8} KL {}  entropy r {}",
            s.config_id,
            m(labeldist::experiment::Metric::MeanKl),
            m(labeldist::experiment::Metric::EntropyPearson)
        ));
    }
    for t in &rep.tests {
        lines.push(format!(
            "  {} soft vs {}: diff {:+.4}, p_holm {:.2e}{}",
            t.metric.name(),
            t.config_b,
            t.mean_diff,
            t.p_holm,
            if t.reject { " *" } else { "" }
        ));
    }
    if let Some((n_train, n_eval)) = a.held_out {
        let h = run_held_out(&prep, &cfg, n_train, n_eval)?;
        let dir = a.exp.out.join("held_out");
        write_held_out(&dir, &cfg, &h)?;
        lines.push(format!("held-out annotators {n_train}:{n_eval}"));
        for s in h.summaries.iter().filter(|s| !s.temperature_scaled) {
            if let Some(v) = s.metrics.get(&labeldist::experiment::Metric::EntropyPearson) {
                lines.push(format!("  {:<8} entropy r {:.4}±{:.4}", s.config_id, v.mean, v.sd));
            }
        }
    }
    finish(&a.exp.out, lines)
}

fn curve(a: ExperimentArgs) -> Result<()> {
    let cfg = a.load()?;
    let prep = prepare_from_config(&cfg)?;
    let rep = run_efficiency_curve(&prep, &cfg)?;
    write_curve(&a.out, &cfg, &rep)?;
    let mut lines = vec![format!("efficiency curve ({})", rep.model_tag)];
    for g in &rep.gap_tests {
        let p = g.one_sided.as_ref().map(|t| format!("{:.2e}", t.p)).unwrap_or("-".into());
        lines.push(format!("  N={:<4} %KL - %r = {:+.2} ± {:.2} pp, one-sided p {p}", g.n, g.gap.mean, g.gap.sd));
    }
    finish(&a.out, lines)
}

fn dirichlet_sweep(a: ExperimentArgs) -> Result<()> {
    let cfg = a.load()?;
    let prep = prepare_from_config(&cfg)?;
    let rep = run_dirichlet_sweep(&prep, &cfg)?;
    write_sweep(&a.out, &cfg, &rep)?;
    finish(&a.out, vec![format!("dirichlet sweep: {} rows ({})", rep.rows.len(), rep.model_tag)])
}

fn ds_compare(a: DsArgs) -> Result<()> {
    let cfg = a.exp.load()?;
    let matrix = match &cfg.raters {
        Some(RaterSource::Csv { path, schema }) => parse_long_csv(path, schema)?,
        Some(RaterSource::Synthetic { items, pool }) => {
            let data = generate_synthetic(items)?;
            let ids: Vec<String> = data.dataset.items.iter().map(|i| i.item_id.clone()).collect();
            generate_rater_matrix(&ids, &data.true_dists, pool)?
        }
        None => return Err(Error::Config("ds-compare needs a `raters` section in the config".into())),
    };
    let ds_cfg = DawidSkeneConfig {
        max_iter: a.max_iter,
        tol: a.tol,
        ..Default::default()
    };
    let rep = run_ds_comparison(&matrix, &cfg.n_grid, &cfg.subsample_seeds, &ds_cfg, cfg.workers)?;
    write_ds(&a.exp.out, Some(&cfg), &rep)?;
    let mut lines = vec!["Dawid-Skene vs raw counts".to_string()];
    for s in &rep.summaries {
        lines.push(format!(
            "  N={:<4} {:?}: KL {:.4} ± {:.4} (skipped {})",
            s.n, s.method, s.mean_kl.mean, s.mean_kl.sd, s.n_skipped
        ));
    }
    finish(&a.exp.out, lines)
}

fn report(a: ReportArgs) -> Result<()> {
    let mut lines = Vec::new();
    for d in &a.dirs {
        let digest = d.join("report.txt");
        let manifest = d.join("manifest.json");
        if !manifest.exists() {
            return Err(Error::IncompleteExperiment(format!("{} has no manifest.json", d.display())));
        }
        let m: serde_json::Value = read_json(&manifest)?;
        lines.push(format!(
            "# {} [{}] {}",
            m["experiment"].as_str().unwrap_or("?"),
            m["kind"].as_str().unwrap_or("?"),
            m["model_tag"].as_str().unwrap_or("")
        ));
        if let Some(files) = m["files"].as_array() {
            for f in files.iter().filter_map(|f| f.as_str()) {
                if !d.join(f).exists() {
                    return Err(Error::IncompleteExperiment(format!("{} is missing {f}", d.display())));
                }
            }
        }
        if let Ok(text) = fs::read_to_string(&digest) {
            lines.extend(text.lines().map(String::from));
        }
        if let Some(w) = m["warnings"].as_array() {
            lines.extend(w.iter().filter_map(|w| w.as_str()).map(|w| format!("  warning: {w}")));
        }
    }
    for l in &lines {
        println!("{l}");
    }
    if let Some(out) = &a.out {
        fs::create_dir_all(out).map_err(|e| Error::Data(format!("{}: {e}", out.display())))?;
        write_digest(out, &lines)?;
    }
    Ok(())
}

fn finish(dir: &Path, lines: Vec<String>) -> Result<()> {
    write_digest(dir, &lines)?;
    for l in &lines {
        println!("{l}");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Split(a) => split(a),
        Command::Targets(a) => targets(a),
        Command::Train(a) => train_cmd(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Compare(a) => compare(a),
        Command::Curve(a) => curve(a),
        Command::DsCompare(a) => ds_compare(a),
        Command::DirichletSweep(a) => dirichlet_sweep(a),
        Command::Report(a) => report(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
