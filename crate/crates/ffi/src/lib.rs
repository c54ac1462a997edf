//! C ABI over `labeldist`.
//!
//! Every fallible function returns an [`LdStatus`] and writes results through
//! out-pointers. On failure the message is kept per thread and can be read
//! with [`ld_last_error`]. Objects cross the boundary as opaque handles that
//! the caller releases with the matching `*_free` function.
//!
//! Panics never unwind into the caller; they surface as `LD_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use labeldist::dawid_skene::{dawid_skene_fit, DawidSkeneConfig, DawidSkeneModel};
use labeldist::experiment::run::score;
use labeldist::experiment::Block;
use labeldist::ingest::{
    collapse_to_counts, load_predictions, parse_counts_jsonl, parse_long_csv, AnnotationMatrix, Dataset,
    FieldMap, LongCsvSchema, PredictionSet,
};
use labeldist::simplex::{divergence, normalize_counts};
use labeldist::stats::{paired_ttest, pct_improvement, Sidedness};
use labeldist::targets::TargetSpec;
use labeldist::{DivergenceKind, Error, EvalPair, LabelDistribution};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Bad argument or configuration.
    Config = 3,
    /// Malformed, inconsistent or insufficient data.
    Data = 4,
    /// The output buffer is too small; the needed length was written back.
    BufferTooSmall = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LdTargetMode {
    Hard = 0,
    Smoothed = 1,
    Soft = 2,
    Dirichlet = 3,
}

/// Evaluation metrics. Correlations are NaN when undefined.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct LdMetrics {
    pub accuracy: f64,
    pub ece: f64,
    pub brier_soft: f64,
    pub dist_ece: f64,
    pub mean_kl: f64,
    pub entropy_pearson: f64,
    pub entropy_spearman: f64,
    pub rel: f64,
    pub res: f64,
    pub unc: f64,
    pub n_items: usize,
}

/// Items with their annotation counts.
pub struct LdDataset(Dataset);

/// A fitted Dawid-Skene model.
pub struct LdDsModel(DawidSkeneModel);

/// Per-item predicted distributions.
pub struct LdPredictions(PredictionSet);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> LdStatus {
    match e {
        Error::Config(_) => LdStatus::Config,
        _ => LdStatus::Data,
    }
}

struct Fail(LdStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

type FfiResult = Result<(), Fail>;

fn guard(f: impl FnOnce() -> FfiResult) -> LdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            LdStatus::Ok
        }
        Ok(Err(Fail(s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            LdStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(LdStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(LdStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

fn classes(spec: &str) -> Vec<String> {
    spec.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
}

/// Copy `rows` (all of width `k`) row-major into `out`. `out_len` carries the
/// buffer capacity in and the number of values needed out.
unsafe fn fill_rows(rows: &[Vec<f64>], out: *mut f64, out_len: *mut usize) -> FfiResult {
    let cap = out_arg(out_len, "out_len")?;
    let need: usize = rows.iter().map(Vec::len).sum();
    if *cap < need {
        let had = std::mem::replace(cap, need);
        return Err(Fail(LdStatus::BufferTooSmall, format!("buffer holds {had} values, {need} needed")));
    }
    *cap = need;
    if need == 0 {
        return Ok(());
    }
    if out.is_null() {
        return Err(null("out"));
    }
    let dst = std::slice::from_raw_parts_mut(out, need);
    for (chunk, row) in dst.chunks_mut(rows[0].len().max(1)).zip(rows) {
        chunk.copy_from_slice(row);
    }
    Ok(())
}

/// Message for the most recent failure on this thread, or null. The pointer is
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn ld_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ld_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Load a counts JSONL. `field_map_json` may be null for the ChaosNLI layout.
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ld_dataset_from_counts_jsonl(
    path: *const c_char,
    field_map_json: *const c_char,
    out: *mut *mut LdDataset,
) -> LdStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let path = PathBuf::from(str_arg(path, "path")?);
        let fields = if field_map_json.is_null() {
            FieldMap::default()
        } else {
            let s = str_arg(field_map_json, "field_map_json")?;
            serde_json::from_str(s).map_err(|e| Fail(LdStatus::Config, format!("field map: {e}")))?
        };
        let ds = parse_counts_jsonl(path, &fields)?;
        *out = Box::into_raw(Box::new(LdDataset(ds)));
        Ok(())
    })
}

unsafe fn long_matrix(path: *const c_char, class_names: *const c_char) -> Result<AnnotationMatrix, Fail> {
    let path = PathBuf::from(str_arg(path, "path")?);
    let names = classes(str_arg(class_names, "class_names")?);
    if names.is_empty() {
        return Err(Fail(LdStatus::Config, "class_names is empty".into()));
    }
    Ok(parse_long_csv(path, &LongCsvSchema::new(names))?)
}

/// Load a long CSV (`item_id,rater_id,label`) and collapse it to counts.
/// `class_names` is a comma-separated list fixing the class order.
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ld_dataset_from_long_csv(
    path: *const c_char,
    class_names: *const c_char,
    out: *mut *mut LdDataset,
) -> LdStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let m = long_matrix(path, class_names)?;
        *out = Box::into_raw(Box::new(LdDataset(collapse_to_counts(&m)?)));
        Ok(())
    })
}

/// # Safety
/// `ds` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ld_dataset_free(ds: *mut LdDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Number of items, or 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ld_dataset_len(ds: *const LdDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.len())
}

/// Number of classes, or 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ld_dataset_k(ds: *const LdDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.k())
}

/// Training targets for every item, row-major `len × k`. A negative
/// `subsample_n` uses the full counts.
///
/// # Safety
/// `ds` must be a live handle; `out` must hold `*out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ld_dataset_targets(
    ds: *const LdDataset,
    mode: LdTargetMode,
    alpha: f64,
    subsample_n: i64,
    seed: u64,
    out: *mut f64,
    out_len: *mut usize,
) -> LdStatus {
    guard(|| {
        let ds = &handle(ds, "ds")?.0;
        let spec = match mode {
            LdTargetMode::Hard => TargetSpec::hard(),
            LdTargetMode::Smoothed => TargetSpec::smoothed(alpha),
            LdTargetMode::Soft => TargetSpec::soft(),
            LdTargetMode::Dirichlet => TargetSpec::dirichlet(alpha),
        };
        let spec = if subsample_n >= 0 {
            spec.subsampled(subsample_n as u64, seed)
        } else {
            spec
        };
        let rows = ds
            .items
            .iter()
            .enumerate()
            .map(|(i, it)| spec.build(&it.counts, i as u64).map(LabelDistribution::into_inner))
            .collect::<Result<Vec<_>, _>>()?;
        fill_rows(&rows, out, out_len)
    })
}

/// Fit Dawid-Skene on a long CSV.
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ld_ds_fit(
    path: *const c_char,
    class_names: *const c_char,
    max_iter: usize,
    tol: f64,
    out: *mut *mut LdDsModel,
) -> LdStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let m = long_matrix(path, class_names)?;
        let cfg = DawidSkeneConfig {
            max_iter,
            tol,
            ..Default::default()
        };
        *out = Box::into_raw(Box::new(LdDsModel(dawid_skene_fit(&m, &cfg)?)));
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ld_ds_free(model: *mut LdDsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ld_ds_n_items(model: *const LdDsModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.posteriors.len())
}

/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ld_ds_converged(model: *const LdDsModel) -> bool {
    model.as_ref().is_some_and(|m| m.0.converged)
}

/// Item posteriors, row-major `n_items × k`, items in first-appearance order.
///
/// # Safety
/// `model` must be a live handle; `out` must hold `*out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ld_ds_posteriors(model: *const LdDsModel, out: *mut f64, out_len: *mut usize) -> LdStatus {
    guard(|| {
        let m = &handle(model, "model")?.0;
        let rows: Vec<Vec<f64>> = m.posteriors.iter().map(|d| d.probs().to_vec()).collect();
        fill_rows(&rows, out, out_len)
    })
}

/// Final observed-data log-likelihood.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ld_ds_loglik(model: *const LdDsModel, out: *mut f64) -> LdStatus {
    guard(|| {
        let m = &handle(model, "model")?.0;
        *out_arg(out, "out")? = m.loglik_trace.last().copied().unwrap_or(f64::NAN);
        Ok(())
    })
}

/// Load predictions JSONL as written by `labeldist train`.
///
/// # Safety
/// `path` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ld_predictions_load(path: *const c_char, out: *mut *mut LdPredictions) -> LdStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let p = load_predictions(PathBuf::from(str_arg(path, "path")?))?;
        *out = Box::into_raw(Box::new(LdPredictions(p)));
        Ok(())
    })
}

/// # Safety
/// `preds` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ld_predictions_free(preds: *mut LdPredictions) {
    if !preds.is_null() {
        drop(Box::from_raw(preds));
    }
}

/// # Safety
/// `preds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ld_predictions_len(preds: *const LdPredictions) -> usize {
    preds.as_ref().map_or(0, |p| p.0.len())
}

/// Score predictions against the dataset's human distributions. Only items
/// present in both are scored; a prediction for an unknown item is an error.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ld_evaluate(
    ds: *const LdDataset,
    preds: *const LdPredictions,
    n_bins: usize,
    out: *mut LdMetrics,
) -> LdStatus {
    guard(|| {
        let ds = &handle(ds, "ds")?.0;
        let preds = &handle(preds, "preds")?.0;
        let out = out_arg(out, "out")?;
        let by_id = preds.by_id();
        let mut block = Block {
            ids: Vec::new(),
            x: Vec::new(),
            counts: Vec::new(),
            index: Vec::new(),
        };
        let mut pairs = Vec::new();
        for it in &ds.items {
            if let Some(p) = by_id.get(it.item_id.as_str()) {
                pairs.push(EvalPair::new(it.item_id.clone(), normalize_counts(&it.counts), p.probs.clone())?);
                block.ids.push(it.item_id.clone());
                block.counts.push(it.counts.clone());
            }
        }
        if pairs.len() != preds.len() {
            return Err(Fail(
                LdStatus::Data,
                format!("{} predictions match no item", preds.len() - pairs.len()),
            ));
        }
        let (m, d) = score(&block, &pairs, n_bins)?;
        *out = LdMetrics {
            accuracy: m.accuracy,
            ece: m.ece,
            brier_soft: m.brier_soft,
            dist_ece: m.dist_ece,
            mean_kl: m.mean_kl,
            entropy_pearson: m.entropy_pearson.unwrap_or(f64::NAN),
            entropy_spearman: m.entropy_spearman.unwrap_or(f64::NAN),
            rel: d.rel,
            res: d.res,
            unc: d.unc,
            n_items: m.n_items,
        };
        Ok(())
    })
}

/// KL(reference ‖ predicted) in nats, prediction floored at 1e-12.
///
/// # Safety
/// Both arrays must hold `k` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ld_kl_divergence(
    reference: *const f64,
    predicted: *const f64,
    k: usize,
    out: *mut f64,
) -> LdStatus {
    guard(|| {
        let p = LabelDistribution::new(slice_arg(reference, k, "reference")?.to_vec())?;
        let q = LabelDistribution::new(slice_arg(predicted, k, "predicted")?.to_vec())?;
        *out_arg(out, "out")? = divergence(&p, &q, DivergenceKind::Kl)?;
        Ok(())
    })
}

/// Share of the hard-to-full improvement reached at N, in percent.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ld_pct_improvement(hard: f64, at_n: f64, full: f64, out: *mut f64) -> LdStatus {
    guard(|| {
        *out_arg(out, "out")? = pct_improvement(hard, at_n, full)?;
        Ok(())
    })
}

/// Paired t-test on `x - y`. Any of the out-pointers may be null.
///
/// # Safety
/// `x` and `y` must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn ld_paired_ttest(
    x: *const f64,
    y: *const f64,
    n: usize,
    one_sided: bool,
    t_out: *mut f64,
    df_out: *mut f64,
    p_out: *mut f64,
) -> LdStatus {
    guard(|| {
        let x = slice_arg(x, n, "x")?;
        let y = slice_arg(y, n, "y")?;
        let sided = if one_sided { Sidedness::One } else { Sidedness::Two };
        let r = paired_ttest(x, y, sided)?;
        for (p, v) in [(t_out, r.t), (df_out, r.df), (p_out, r.p)] {
            if let Some(p) = p.as_mut() {
                *p = v;
            }
        }
        Ok(())
    })
}
