//! Dataset adapters, deterministic stratified splits and prediction files.
//!
//! Formats:
//! - counts JSONL: one JSON object per line with an id, a per-class count
//!   field (object keyed by class name, or array in class order) and optional
//!   text fields. Field names are configurable through [`FieldMap`].
//! - long CSV: header row, one `(item, rater, label)` record per line.
//! - predictions CSV: `item_id,p_0..p_{K-1}[,z_0..z_{K-1}]`, 12 decimals.
//! - features CSV: `item_id,f_0..f_{D-1}`.
//! - split file: JSON [`SplitAssignment`].

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::simplex::{softmax, AnnotationCounts, LabelDistribution};
use crate::targets::plurality_label;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub item_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<(String, String)>,
    pub counts: AnnotationCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub items: Vec<Item>,
    pub class_names: Vec<String>,
}

impl Dataset {
    pub fn new(items: Vec<Item>, class_names: Vec<String>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let k = class_names.len();
        let mut seen = HashSet::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            if item.counts.k() != k {
                return Err(Error::Schema {
                    line: i + 1,
                    message: format!("item {} has {} classes, expected {k}", item.item_id, item.counts.k()),
                });
            }
            if !seen.insert(item.item_id.as_str()) {
                return Err(Error::Schema {
                    line: i + 1,
                    message: format!("duplicate item id {}", item.item_id),
                });
            }
        }
        Ok(Self { items, class_names })
    }

    pub fn k(&self) -> usize {
        self.class_names.len()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, item_id: &str) -> Option<&Item> {
        self.items.iter().find(|i| i.item_id == item_id)
    }

    pub fn index(&self) -> HashMap<&str, &Item> {
        self.items.iter().map(|i| (i.item_id.as_str(), i)).collect()
    }

    /// Items restricted to `ids`, in the order of `ids`.
    pub fn subset(&self, ids: &[String]) -> Result<Dataset> {
        let idx = self.index();
        let items = ids
            .iter()
            .map(|id| {
                idx.get(id.as_str())
                    .map(|i| (*i).clone())
                    .ok_or_else(|| Error::Data(format!("unknown item id {id}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(items, self.class_names.clone())
    }

    pub fn total_annotations(&self) -> u64 {
        self.items.iter().map(|i| i.counts.total()).sum()
    }
}

/// Field names for the counts JSONL adapter. Nested fields use dotted paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldMap {
    pub id: String,
    pub counts: String,
    pub class_names: Vec<String>,
    #[serde(default)]
    pub text: Option<(String, String)>,
}

impl Default for FieldMap {
    /// The ChaosNLI release layout.
    fn default() -> Self {
        Self {
            id: "uid".into(),
            counts: "label_counter".into(),
            class_names: vec!["e".into(), "n".into(), "c".into()],
            text: Some(("example.premise".into(), "example.hypothesis".into())),
        }
    }
}

fn lookup<'a>(v: &'a Value, dotted: &str) -> Option<&'a Value> {
    dotted.split('.').try_fold(v, |cur, key| cur.get(key))
}

fn value_as_string(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

pub fn parse_counts_jsonl(path: impl AsRef<Path>, fields: &FieldMap) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_counts_reader(BufReader::new(file), fields)
}

pub fn parse_counts_reader(reader: impl BufRead, fields: &FieldMap) -> Result<Dataset> {
    let k = fields.class_names.len();
    if k < 2 {
        return Err(Error::config("field map must declare at least 2 class names"));
    }
    let class_index: HashMap<&str, usize> =
        fields.class_names.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let mut items = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let v: Value = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        let schema = |message: String| Error::Schema { line: lineno, message };
        let item_id = lookup(&v, &fields.id)
            .and_then(value_as_string)
            .ok_or_else(|| schema(format!("missing id field {:?}", fields.id)))?;
        let raw = lookup(&v, &fields.counts)
            .ok_or_else(|| schema(format!("missing count field {:?}", fields.counts)))?;
        let counts = match raw {
            Value::Object(map) => {
                let mut c = vec![0u64; k];
                for (name, n) in map {
                    let idx = *class_index
                        .get(name.as_str())
                        .ok_or_else(|| schema(format!("unknown class name {name:?}")))?;
                    c[idx] = n.as_u64().ok_or_else(|| schema(format!("count for {name:?} is not a non-negative integer")))?;
                }
                c
            }
            Value::Array(arr) => {
                if arr.len() != k {
                    return Err(schema(format!("count array has {} entries, expected {k}", arr.len())));
                }
                arr.iter()
                    .map(|n| n.as_u64().ok_or_else(|| schema("count is not a non-negative integer".into())))
                    .collect::<Result<Vec<_>>>()?
            }
            _ => return Err(schema("count field must be an object or an array".into())),
        };
        let counts = AnnotationCounts::new(counts).map_err(|e| schema(e.to_string()))?;
        let text = match &fields.text {
            Some((a, b)) => match (lookup(&v, a).and_then(value_as_string), lookup(&v, b).and_then(value_as_string)) {
                (Some(x), Some(y)) => Some((x, y)),
                _ => None,
            },
            None => None,
        };
        items.push(Item { item_id, text, counts });
    }
    Dataset::new(items, fields.class_names.clone())
}

/// Write a dataset as counts JSONL with array-valued counts.
pub fn write_counts_jsonl(dataset: &Dataset, path: impl AsRef<Path>) -> Result<FieldMap> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in &dataset.items {
        let mut obj = serde_json::Map::new();
        obj.insert("uid".into(), Value::String(item.item_id.clone()));
        obj.insert("label_count".into(), serde_json::to_value(item.counts.counts())?);
        if let Some((a, b)) = &item.text {
            obj.insert("premise".into(), Value::String(a.clone()));
            obj.insert("hypothesis".into(), Value::String(b.clone()));
        }
        serde_json::to_writer(&mut w, &Value::Object(obj))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(FieldMap {
        id: "uid".into(),
        counts: "label_count".into(),
        class_names: dataset.class_names.clone(),
        text: Some(("premise".into(), "hypothesis".into())),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub item_id: String,
    pub annotator_id: String,
    pub label: usize,
}

/// Long-format (item, annotator, label) records. The matrix may be sparse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationMatrix {
    pub records: Vec<AnnotationRecord>,
    pub class_names: Vec<String>,
}

impl AnnotationMatrix {
    pub fn new(records: Vec<AnnotationRecord>, class_names: Vec<String>) -> Result<Self> {
        let k = class_names.len();
        let mut seen = HashSet::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if r.label >= k {
                return Err(Error::Schema {
                    line: i + 1,
                    message: format!("label index {} out of range for K={k}", r.label),
                });
            }
            if !seen.insert((r.item_id.as_str(), r.annotator_id.as_str())) {
                return Err(Error::DuplicateRecord {
                    item_id: r.item_id.clone(),
                    rater_id: r.annotator_id.clone(),
                });
            }
        }
        Ok(Self { records, class_names })
    }

    pub fn k(&self) -> usize {
        self.class_names.len()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Item ids in order of first appearance.
    pub fn item_ids(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        self.records
            .iter()
            .filter(|r| seen.insert(r.item_id.as_str()))
            .map(|r| r.item_id.clone())
            .collect()
    }

    /// Records grouped per item, keeping the item first-appearance order.
    pub fn by_item(&self) -> Vec<(String, Vec<&AnnotationRecord>)> {
        let mut order: Vec<String> = Vec::new();
        let mut groups: HashMap<&str, Vec<&AnnotationRecord>> = HashMap::new();
        for r in &self.records {
            groups
                .entry(r.item_id.as_str())
                .or_insert_with(|| {
                    order.push(r.item_id.clone());
                    Vec::new()
                })
                .push(r);
        }
        order
            .into_iter()
            .map(|id| {
                let g = groups.remove(id.as_str()).unwrap_or_default();
                (id, g)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongCsvSchema {
    pub item_column: String,
    pub rater_column: String,
    pub label_column: String,
    /// Declared class ordering; label strings map to their index here.
    pub class_names: Vec<String>,
}

impl LongCsvSchema {
    pub fn new(class_names: Vec<String>) -> Self {
        Self {
            item_column: "item_id".into(),
            rater_column: "rater_id".into(),
            label_column: "label".into(),
            class_names,
        }
    }
}

pub fn parse_long_csv(path: impl AsRef<Path>, schema: &LongCsvSchema) -> Result<AnnotationMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_long_reader(file, schema)
}

pub fn parse_long_reader(reader: impl std::io::Read, schema: &LongCsvSchema) -> Result<AnnotationMatrix> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Schema {
            line: 1,
            message: format!("missing column {name:?}"),
        })
    };
    let (ci, cr, cl) = (col(&schema.item_column)?, col(&schema.rater_column)?, col(&schema.label_column)?);
    let class_index: HashMap<&str, usize> =
        schema.class_names.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let field = |c: usize| row.get(c).unwrap_or("").to_string();
        let (item_id, annotator_id, label) = (field(ci), field(cr), field(cl));
        let label = *class_index.get(label.as_str()).ok_or_else(|| Error::Schema {
            line,
            message: format!("unknown label {label:?}"),
        })?;
        if !seen.insert((item_id.clone(), annotator_id.clone())) {
            return Err(Error::DuplicateRecord {
                item_id,
                rater_id: annotator_id,
            });
        }
        records.push(AnnotationRecord {
            item_id,
            annotator_id,
            label,
        });
    }
    AnnotationMatrix::new(records, schema.class_names.clone())
}

pub fn write_long_csv(matrix: &AnnotationMatrix, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["item_id", "rater_id", "label"])?;
    for r in &matrix.records {
        w.write_record([r.item_id.as_str(), r.annotator_id.as_str(), matrix.class_names[r.label].as_str()])?;
    }
    w.flush().map_err(|e| Error::io("long csv", e))?;
    Ok(())
}

/// Tally long-format records into per-item counts (items in first-appearance order).
pub fn collapse_to_counts(matrix: &AnnotationMatrix) -> Result<Dataset> {
    if matrix.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let k = matrix.k();
    let items = matrix
        .by_item()
        .into_iter()
        .map(|(item_id, recs)| {
            let mut c = vec![0u64; k];
            for r in recs {
                c[r.label] += 1;
            }
            Ok(Item {
                item_id,
                text: None,
                counts: AnnotationCounts::new(c)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(items, matrix.class_names.clone())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub seed: u64,
    pub ratios: [f64; 3],
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl SplitAssignment {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.val.len(), self.test.len())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer_pretty(BufWriter::new(f), self)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_reader(BufReader::new(f))?)
    }
}

fn validate_ratios(ratios: [f64; 3]) -> Result<()> {
    if ratios.iter().any(|r| !(0.0..=1.0).contains(r)) {
        return Err(Error::config(format!("split ratios {ratios:?} must each lie in [0, 1]")));
    }
    let s: f64 = ratios.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::config(format!("split ratios sum to {s}, expected 1")));
    }
    Ok(())
}

/// Largest-remainder apportionment of `n` units across `ratios`; ties go to the lowest index.
fn largest_remainder(n: usize, ratios: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = ratios.iter().map(|r| n as f64 * r).collect();
    let mut alloc: Vec<usize> = quotas.iter().map(|q| (q + 1e-9).floor() as usize).collect();
    let mut left = n - alloc.iter().sum::<usize>().min(n);
    let mut order: Vec<usize> = (0..ratios.len()).filter(|&j| ratios[j] > 0.0).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - alloc[a] as f64;
        let rb = quotas[b] - alloc[b] as f64;
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &j in order.iter().cycle() {
        if left == 0 {
            break;
        }
        alloc[j] += 1;
        left -= 1;
    }
    alloc
}

/// Deterministic split stratified by plurality label.
///
/// Items are sorted by id, grouped by plurality label, and each stratum is
/// shuffled with a generator derived from `(seed, stratum)`. Global split sizes
/// are the largest-remainder apportionment of the whole dataset; each stratum
/// receives its floor quota per split, and the leftover units go to the
/// (stratum, split) pairs with the largest fractional remainders.
pub fn stratified_split(dataset: &Dataset, ratios: [f64; 3], seed: u64) -> Result<SplitAssignment> {
    validate_ratios(ratios)?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut strata: BTreeMap<usize, Vec<&str>> = BTreeMap::new();
    for item in &dataset.items {
        strata.entry(plurality_label(&item.counts)).or_default().push(&item.item_id);
    }
    let n = dataset.len();
    let targets = largest_remainder(n, &ratios);

    let mut alloc: Vec<[usize; 3]> = Vec::with_capacity(strata.len());
    let mut leftover: Vec<usize> = Vec::with_capacity(strata.len());
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (s, ids) in strata.values().enumerate() {
        let ns = ids.len();
        let mut a = [0usize; 3];
        for j in 0..3 {
            let q = ns as f64 * ratios[j];
            a[j] = (q + 1e-9).floor() as usize;
            if ratios[j] > 0.0 {
                candidates.push((q - a[j] as f64, s, j));
            }
        }
        leftover.push(ns - a.iter().sum::<usize>());
        alloc.push(a);
    }
    let mut deficit: Vec<usize> = (0..3).map(|j| targets[j] - alloc.iter().map(|a| a[j]).sum::<usize>()).collect();
    candidates.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    for &(_, s, j) in &candidates {
        if leftover[s] > 0 && deficit[j] > 0 {
            alloc[s][j] += 1;
            leftover[s] -= 1;
            deficit[j] -= 1;
        }
    }
    // rare: greedy could not pair every leftover with a distinct split
    for s in 0..alloc.len() {
        for j in 0..3 {
            while leftover[s] > 0 && deficit[j] > 0 {
                alloc[s][j] += 1;
                leftover[s] -= 1;
                deficit[j] -= 1;
            }
        }
    }

    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for (s, (&stratum, ids)) in strata.iter().enumerate() {
        let mut ids: Vec<&str> = ids.clone();
        ids.sort_unstable();
        SplitMix64::derive(seed, stratum as u64).shuffle(&mut ids);
        let [a, b, _] = alloc[s];
        train.extend(ids[..a].iter().map(|s| s.to_string()));
        val.extend(ids[a..a + b].iter().map(|s| s.to_string()));
        test.extend(ids[a + b..].iter().map(|s| s.to_string()));
    }
    train.sort();
    val.sort();
    test.sort();
    Ok(SplitAssignment {
        seed,
        ratios,
        train,
        val,
        test,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub item_id: String,
    pub probs: LabelDistribution,
    pub logits: Option<Vec<f64>>,
}

/// Per-item model outputs keyed by item id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PredictionSet {
    pub rows: Vec<PredictionRow>,
}

impl PredictionSet {
    pub fn k(&self) -> Option<usize> {
        self.rows.first().map(|r| r.probs.k())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn by_id(&self) -> HashMap<&str, &PredictionRow> {
        self.rows.iter().map(|r| (r.item_id.as_str(), r)).collect()
    }

    pub fn from_logits(ids: &[String], logits: &[Vec<f64>]) -> Result<Self> {
        let rows = ids
            .iter()
            .zip(logits)
            .map(|(id, z)| {
                Ok(PredictionRow {
                    item_id: id.clone(),
                    probs: LabelDistribution::from_weights(&softmax(z))?,
                    logits: Some(z.clone()),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { rows })
    }
}

pub fn store_predictions(preds: &PredictionSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_predictions(preds, file)
}

pub fn write_predictions(preds: &PredictionSet, out: impl Write) -> Result<()> {
    let k = preds.k().unwrap_or(0);
    let with_logits = !preds.rows.is_empty() && preds.rows.iter().all(|r| r.logits.is_some());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["item_id".to_string()];
    header.extend((0..k).map(|i| format!("p_{i}")));
    if with_logits {
        header.extend((0..k).map(|i| format!("z_{i}")));
    }
    w.write_record(&header)?;
    for r in &preds.rows {
        let mut rec = vec![r.item_id.clone()];
        rec.extend(r.probs.probs().iter().map(|p| format!("{p:.12}")));
        if with_logits {
            // logits are written at full precision so temperature refits are exact
            rec.extend(r.logits.as_ref().unwrap().iter().map(|z| format!("{z:e}")));
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("predictions", e))?;
    Ok(())
}

pub fn load_predictions(path: impl AsRef<Path>) -> Result<PredictionSet> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_predictions(file)
}

pub fn read_predictions(input: impl std::io::Read) -> Result<PredictionSet> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers()?.clone();
    if headers.get(0) != Some("item_id") {
        return Err(Error::Schema {
            line: 1,
            message: "first column must be item_id".into(),
        });
    }
    let p_cols: Vec<usize> = column_family(&headers, "p_");
    let z_cols: Vec<usize> = column_family(&headers, "z_");
    let k = p_cols.len().max(z_cols.len());
    if k < 2 || (!p_cols.is_empty() && !z_cols.is_empty() && p_cols.len() != z_cols.len()) {
        return Err(Error::Schema {
            line: 1,
            message: "need p_0..p_{K-1} and/or z_0..z_{K-1} columns with K >= 2".into(),
        });
    }
    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let item_id = rec.get(0).unwrap_or("").to_string();
        if !seen.insert(item_id.clone()) {
            return Err(Error::Validation(format!("line {line}: duplicate item id {item_id}")));
        }
        let parse = |cols: &[usize]| -> Result<Option<Vec<f64>>> {
            if cols.is_empty() || cols.iter().all(|&c| rec.get(c).is_none_or(|s| s.is_empty())) {
                return Ok(None);
            }
            cols.iter()
                .map(|&c| {
                    rec.get(c).unwrap_or("").parse::<f64>().map_err(|e| Error::Parse {
                        line,
                        message: format!("column {}: {e}", headers.get(c).unwrap_or("?")),
                    })
                })
                .collect::<Result<Vec<_>>>()
                .map(Some)
        };
        let probs = parse(&p_cols)?;
        let logits = parse(&z_cols)?;
        let valid_probs = probs.as_ref().filter(|p| {
            p.iter().all(|x| x.is_finite() && *x >= 0.0) && (p.iter().sum::<f64>() - 1.0).abs() <= 1e-6
        });
        let dist = match (valid_probs, &logits) {
            (Some(p), _) => LabelDistribution::from_weights(p)?,
            (None, Some(z)) => {
                if z.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Validation(format!("line {line}: non-finite logits")));
                }
                LabelDistribution::from_weights(&softmax(z))?
            }
            (None, None) => {
                return Err(Error::Validation(format!(
                    "line {line}: probabilities for {item_id} do not sum to 1 within 1e-6 and no logits were given"
                )))
            }
        };
        rows.push(PredictionRow {
            item_id,
            probs: dist,
            logits,
        });
    }
    Ok(PredictionSet { rows })
}

fn column_family(headers: &csv::StringRecord, prefix: &str) -> Vec<usize> {
    let mut cols: Vec<(usize, usize)> = headers
        .iter()
        .enumerate()
        .filter_map(|(c, h)| h.strip_prefix(prefix).and_then(|s| s.parse::<usize>().ok()).map(|i| (i, c)))
        .collect();
    cols.sort_unstable();
    cols.into_iter().map(|(_, c)| c).collect()
}

/// Dense per-item feature vectors keyed by item id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureTable {
    pub dim: usize,
    pub rows: HashMap<String, Vec<f64>>,
}

impl FeatureTable {
    pub fn get(&self, id: &str) -> Result<&[f64]> {
        self.rows
            .get(id)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Data(format!("no features for item {id}")))
    }

    /// Feature matrix for `ids`, one row per id.
    pub fn matrix(&self, ids: &[String]) -> Result<Vec<Vec<f64>>> {
        ids.iter().map(|id| self.get(id).map(<[f64]>::to_vec)).collect()
    }
}

pub fn load_features(path: impl AsRef<Path>) -> Result<FeatureTable> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let dim = rdr.headers()?.len().saturating_sub(1);
    if dim == 0 {
        return Err(Error::Schema {
            line: 1,
            message: "features file needs item_id plus at least one feature column".into(),
        });
    }
    let mut rows = HashMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let id = rec.get(0).unwrap_or("").to_string();
        let v = rec
            .iter()
            .skip(1)
            .map(|s| {
                s.parse::<f64>().map_err(|e| Error::Parse {
                    line,
                    message: e.to_string(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.insert(id, v);
    }
    Ok(FeatureTable { dim, rows })
}

pub fn store_features(table: &FeatureTable, order: &[String], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["item_id".to_string()];
    header.extend((0..table.dim).map(|i| format!("f_{i}")));
    w.write_record(&header)?;
    for id in order {
        let mut rec = vec![id.clone()];
        rec.extend(table.get(id)?.iter().map(|x| format!("{x:e}")));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("features", e))?;
    Ok(())
}
