use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use labeldist::experiment::{DataSource, ExperimentConfig};
use labeldist::modelkit::SyntheticSpec;

fn labeldist(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_labeldist")).args(args).output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const COUNTS: &str = r#"{"uid":"a","label_counter":{"e":3,"n":1}}
{"uid":"b","label_counter":{"c":4}}
{"uid":"c","label_counter":{"e":1,"n":1,"c":2}}
{"uid":"d","label_counter":{"n":5}}
{"uid":"e","label_counter":{"e":2,"c":2}}
{"uid":"f","label_counter":{"e":4}}
"#;

#[test]
fn ingest_split_and_targets() {
    let dir = tempfile::tempdir().unwrap();
    let counts = dir.path().join("counts.jsonl");
    fs::write(&counts, COUNTS).unwrap();

    let norm = dir.path().join("norm.jsonl");
    let out = labeldist(&["ingest", "--counts", p(&counts), "--out", p(&norm)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(&norm).unwrap().lines().count(), 6);

    let split = dir.path().join("split.json");
    let out = labeldist(&["split", "--counts", p(&counts), "--seed", "1", "--out", p(&split)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s: serde_json::Value = serde_json::from_str(&fs::read_to_string(&split).unwrap()).unwrap();
    let n: usize = ["train", "val", "test"].iter().map(|k| s[k].as_array().unwrap().len()).sum();
    assert_eq!(n, 6);

    let out = labeldist(&["targets", "--counts", p(&counts), "--mode", "soft"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("0.75"));
}

#[test]
fn long_csv_ds_targets() {
    let dir = tempfile::tempdir().unwrap();
    let long = dir.path().join("long.csv");
    fs::write(&long, "item_id,rater_id,label\ni1,r1,yes\ni1,r2,yes\ni2,r1,no\ni2,r2,no\ni3,r1,yes\ni3,r2,no\n").unwrap();
    let out = labeldist(&["targets", "--long", p(&long), "--classes", "no,yes", "--mode", "ds"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 3);
}

#[test]
fn curve_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::new(DataSource::Synthetic(SyntheticSpec {
        n_items: 120,
        n_features: 6,
        annotators_per_item: 20,
        seed: 1,
        ..Default::default()
    }));
    cfg.model.epochs = 2;
    cfg.model_seeds = vec![1, 2];
    cfg.subsample_seeds = vec![5];
    cfg.n_grid = vec![3, 10];
    let cfg_path = dir.path().join("cfg.json");
    fs::write(&cfg_path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let out_dir = dir.path().join("curve");

    let out = labeldist(&["curve", "--config", p(&cfg_path), "--out", p(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("curve.csv").exists());

    let out = labeldist(&["report", p(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!out.stdout.is_empty());

    // a listed output that went missing makes the directory incomplete
    fs::remove_file(out_dir.join("curve.csv")).unwrap();
    assert_eq!(labeldist(&["report", p(&out_dir)]).status.code(), Some(4));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad_cfg = dir.path().join("bad.json");
    fs::write(&bad_cfg, r#"{"name": "x"}"#).unwrap();
    let out = labeldist(&["curve", "--config", p(&bad_cfg), "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));

    let garbage = dir.path().join("garbage.jsonl");
    fs::write(&garbage, "not json\n").unwrap();
    let out = labeldist(&["ingest", "--counts", p(&garbage), "--out", p(&dir.path().join("o.jsonl"))]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));

    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    assert_eq!(labeldist(&["report", p(&empty)]).status.code(), Some(4));
}
