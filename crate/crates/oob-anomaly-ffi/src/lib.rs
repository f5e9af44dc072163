//! C ABI for the out-of-bag anomaly detection library.
//!
//! Handles are opaque pointers created and destroyed here; every fallible
//! call returns an [`OobStatus`] and, on failure, stores a message that
//! [`oob_last_error_message`] retrieves. Scores are copied into
//! caller-provided buffers. The generated header lands in
//! `include/oob_anomaly.h`.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use libc::c_char;

use oob_anomaly::dataset::{load_csv, Dataset, MissingPolicy, SchemaConfig};
use oob_anomaly::error::Error;
use oob_anomaly::eval::{roc_auc, LabeledScores};
use oob_anomaly::forest::ForestConfig;
use oob_anomaly::scoring::{score_dataset, AnomalyReport};

/// Result of every fallible call in this interface.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OobStatus {
    /// The call succeeded.
    Ok = 0,
    /// A pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The input file could not be read.
    Io = 3,
    /// The input file could not be parsed.
    Parse = 4,
    /// A parameter was out of range.
    Config = 5,
    /// The data violates a contract (constant column, bad label, ...).
    Data = 6,
    /// An output buffer was too small or an index out of range.
    Bounds = 7,
    /// The library panicked; this is a bug.
    Internal = 8,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let message = CString::new(message.replace('\0', " "))
        .unwrap_or_else(|_| CString::new("error message had interior nul").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(message));
}

fn status_of(err: &Error) -> OobStatus {
    match err {
        Error::Io(_) => OobStatus::Io,
        Error::Csv(_)
        | Error::RaggedRow { .. }
        | Error::BadNumber { .. }
        | Error::MissingValue { .. } => OobStatus::Parse,
        Error::Config(_) => OobStatus::Config,
        _ => OobStatus::Data,
    }
}

fn fail(err: Error) -> OobStatus {
    let status = status_of(&err);
    set_error(err.to_string());
    status
}

fn guard<F: FnOnce() -> OobStatus>(f: F) -> OobStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic".to_string());
            OobStatus::Internal
        }
    }
}

/// A loaded dataset. Create with [`oob_dataset_from_csv`], destroy with
/// [`oob_dataset_free`].
pub struct OobDataset {
    inner: Dataset,
}

/// A finished scoring run. Destroy with [`oob_report_free`].
pub struct OobReport {
    inner: AnomalyReport,
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn oob_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the last error on this thread, or null when none happened.
/// The caller owns the returned string and frees it with
/// [`oob_string_free`].
#[no_mangle]
pub extern "C" fn oob_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|slot| match &*slot.borrow() {
        Some(message) => message.clone().into_raw(),
        None => std::ptr::null_mut(),
    })
}

/// Free a string returned by this library.
///
/// # Safety
/// `s` must have been returned by [`oob_last_error_message`] and not freed
/// already; null is accepted and ignored.
#[no_mangle]
pub unsafe extern "C" fn oob_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Load a CSV file (header row, comma separated, UTF-8) into a dataset.
///
/// `cat_threshold` is the distinct-ratio below which integer-valued columns
/// are treated as categorical (the usual choice is 0.05). When
/// `drop_missing_rows` is false, rows with empty cells fail the load.
///
/// # Safety
/// `path` must point to a NUL-terminated string and `out` to writable
/// storage for one pointer. On success `*out` owns the dataset.
#[no_mangle]
pub unsafe extern "C" fn oob_dataset_from_csv(
    path: *const c_char,
    cat_threshold: f64,
    drop_missing_rows: bool,
    out: *mut *mut OobDataset,
) -> OobStatus {
    if path.is_null() || out.is_null() {
        set_error("null argument".to_string());
        return OobStatus::NullArgument;
    }
    let path = match CStr::from_ptr(path).to_str() {
        Ok(s) => PathBuf::from(s),
        Err(_) => {
            set_error("path is not valid UTF-8".to_string());
            return OobStatus::InvalidUtf8;
        }
    };
    guard(|| {
        let schema = SchemaConfig {
            categorical_ratio_threshold: cat_threshold,
            missing_policy: if drop_missing_rows {
                MissingPolicy::DropRows
            } else {
                MissingPolicy::Reject
            },
            ..SchemaConfig::default()
        };
        match load_csv(&path, &schema) {
            Ok(dataset) => {
                *out = Box::into_raw(Box::new(OobDataset { inner: dataset }));
                OobStatus::Ok
            }
            Err(err) => fail(err),
        }
    })
}

/// # Safety
/// `dataset` must come from [`oob_dataset_from_csv`] and not be freed
/// twice; null is accepted and ignored.
#[no_mangle]
pub unsafe extern "C" fn oob_dataset_free(dataset: *mut OobDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Number of rows, or 0 for null.
///
/// # Safety
/// `dataset` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn oob_dataset_rows(dataset: *const OobDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.inner.n_rows())
}

/// Number of columns, or 0 for null.
///
/// # Safety
/// `dataset` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn oob_dataset_columns(dataset: *const OobDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.inner.n_columns())
}

/// Score every row of the dataset: one ensemble of `n_trees` trees per
/// feature, minimum leaf size `ceil(min_leaf_fraction * rows)`, all work
/// seeded by `seed`. Uses every available core.
///
/// # Safety
/// `dataset` must be a live handle and `out` writable storage for one
/// pointer. On success `*out` owns the report.
#[no_mangle]
pub unsafe extern "C" fn oob_score(
    dataset: *const OobDataset,
    n_trees: usize,
    min_leaf_fraction: f64,
    seed: u64,
    out: *mut *mut OobReport,
) -> OobStatus {
    let Some(dataset) = dataset.as_ref() else {
        set_error("null dataset".to_string());
        return OobStatus::NullArgument;
    };
    if out.is_null() {
        set_error("null out pointer".to_string());
        return OobStatus::NullArgument;
    }
    guard(|| {
        let config = ForestConfig {
            n_trees,
            min_leaf_fraction,
            seed,
            ..ForestConfig::default()
        };
        match score_dataset(&dataset.inner, &config) {
            Ok(report) => {
                *out = Box::into_raw(Box::new(OobReport { inner: report }));
                OobStatus::Ok
            }
            Err(err) => fail(err),
        }
    })
}

/// # Safety
/// `report` must come from [`oob_score`] and not be freed twice; null is
/// accepted and ignored.
#[no_mangle]
pub unsafe extern "C" fn oob_report_free(report: *mut OobReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Number of scored rows, or 0 for null.
///
/// # Safety
/// `report` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn oob_report_rows(report: *const OobReport) -> usize {
    report.as_ref().map_or(0, |r| r.inner.n_rows())
}

/// Number of scored features, or 0 for null.
///
/// # Safety
/// `report` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn oob_report_features(report: *const OobReport) -> usize {
    report.as_ref().map_or(0, |r| r.inner.n_features())
}

/// Copy the per-row total scores (sums of scaled per-feature scores) into
/// `out`, which holds `len` doubles; `len` must equal the row count.
///
/// # Safety
/// `report` must be a live handle and `out` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn oob_report_total_scores(
    report: *const OobReport,
    out: *mut f64,
    len: usize,
) -> OobStatus {
    let Some(report) = report.as_ref() else {
        set_error("null report".to_string());
        return OobStatus::NullArgument;
    };
    if out.is_null() {
        set_error("null out pointer".to_string());
        return OobStatus::NullArgument;
    }
    if len != report.inner.n_rows() {
        set_error(format!(
            "buffer holds {len} values, report has {}",
            report.inner.n_rows()
        ));
        return OobStatus::Bounds;
    }
    std::ptr::copy_nonoverlapping(report.inner.total.as_ptr(), out, len);
    OobStatus::Ok
}

/// Copy one feature's scaled scores (in [0, 1]) into `out`, which holds
/// `len` doubles; `len` must equal the row count.
///
/// # Safety
/// `report` must be a live handle and `out` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn oob_report_feature_scores(
    report: *const OobReport,
    feature: usize,
    out: *mut f64,
    len: usize,
) -> OobStatus {
    let Some(report) = report.as_ref() else {
        set_error("null report".to_string());
        return OobStatus::NullArgument;
    };
    if out.is_null() {
        set_error("null out pointer".to_string());
        return OobStatus::NullArgument;
    }
    if feature >= report.inner.n_features() {
        set_error(format!(
            "feature {feature} out of range for {}",
            report.inner.n_features()
        ));
        return OobStatus::Bounds;
    }
    if len != report.inner.n_rows() {
        set_error(format!(
            "buffer holds {len} values, report has {}",
            report.inner.n_rows()
        ));
        return OobStatus::Bounds;
    }
    let scaled = &report.inner.features[feature].scaled;
    std::ptr::copy_nonoverlapping(scaled.as_ptr(), out, len);
    OobStatus::Ok
}

/// Row indices of the ceil(pct * rows) highest scores, highest first (ties
/// go to the lower index). `written` receives how many indices were stored;
/// `cap` is the capacity of `out`.
///
/// # Safety
/// `report` must be a live handle, `out` writable for `cap` values and
/// `written` for one value.
#[no_mangle]
pub unsafe extern "C" fn oob_report_top_indices(
    report: *const OobReport,
    pct: f64,
    out: *mut usize,
    cap: usize,
    written: *mut usize,
) -> OobStatus {
    let Some(report) = report.as_ref() else {
        set_error("null report".to_string());
        return OobStatus::NullArgument;
    };
    if out.is_null() || written.is_null() {
        set_error("null out pointer".to_string());
        return OobStatus::NullArgument;
    }
    if !(0.0..1.0).contains(&pct) {
        set_error(format!("pct must be in [0, 1), got {pct}"));
        return OobStatus::Config;
    }
    let n = report.inner.n_rows();
    let count = (pct * n as f64).ceil() as usize;
    if count > cap {
        set_error(format!("need room for {count} indices, buffer holds {cap}"));
        return OobStatus::Bounds;
    }
    let ranked = report.inner.ranked_rows();
    for (slot, &row) in ranked[..count].iter().enumerate() {
        *out.add(slot) = row;
    }
    *written = count;
    OobStatus::Ok
}

/// ROC AUC of `scores` against binary `labels` (1 = anomaly), computed by
/// the tie-aware rank statistic. Fails with `Data` when labels are all one
/// class.
///
/// # Safety
/// `scores` and `labels` must hold `len` readable values; `out` must be
/// writable for one double.
#[no_mangle]
pub unsafe extern "C" fn oob_roc_auc(
    scores: *const f64,
    labels: *const u8,
    len: usize,
    out: *mut f64,
) -> OobStatus {
    if scores.is_null() || labels.is_null() || out.is_null() {
        set_error("null argument".to_string());
        return OobStatus::NullArgument;
    }
    let scores = std::slice::from_raw_parts(scores, len).to_vec();
    let labels: Vec<bool> = std::slice::from_raw_parts(labels, len)
        .iter()
        .map(|&l| l != 0)
        .collect();
    guard(|| {
        let labeled = match LabeledScores::new(scores.clone(), labels.clone()) {
            Ok(l) => l,
            Err(err) => return fail(err),
        };
        match roc_auc(&labeled) {
            Ok(auc) => {
                *out = auc;
                OobStatus::Ok
            }
            Err(err) => fail(err),
        }
    })
}
