use std::fs;
use std::path::Path;

use labeldist::experiment::output::write_curve;
use labeldist::experiment::{prepare_from_config, run_efficiency_curve, DataSource, ExperimentConfig};
use labeldist::modelkit::SyntheticSpec;

fn small_config(workers: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(DataSource::Synthetic(SyntheticSpec {
        n_items: 240,
        n_features: 8,
        annotators_per_item: 30,
        seed: 3,
        ..Default::default()
    }));
    cfg.model.epochs = 3;
    cfg.model_seeds = vec![1, 2, 3];
    cfg.subsample_seeds = vec![10, 11];
    cfg.n_grid = vec![3, 10, 30];
    cfg.workers = Some(workers);
    cfg
}

fn run_into(dir: &Path, workers: usize) {
    let cfg = small_config(workers);
    let prep = prepare_from_config(&cfg).unwrap();
    let rep = run_efficiency_curve(&prep, &cfg).unwrap();
    write_curve(dir, &cfg, &rep).unwrap();
}

#[test]
fn curve_outputs_are_byte_identical_across_runs_and_worker_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_into(a.path(), 1);
    run_into(b.path(), 3);
    for name in ["curve.csv", "gap_tests.csv", "runs.csv", "pct_mean_kl.dat"] {
        let x = fs::read(a.path().join(name)).unwrap();
        let y = fs::read(b.path().join(name)).unwrap();
        assert!(!x.is_empty(), "{name} is empty");
        assert_eq!(x, y, "{name} differs between runs");
    }
}
