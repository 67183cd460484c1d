//! C interface to the fairover library.
//!
//! Datasets are opaque `FoDataset` handles created by a constructor and
//! released with `fo_dataset_free`. Every fallible call returns an
//! `FoStatus`; on failure `fo_last_error` gives a message for the calling
//! thread. Panics are caught at the boundary and reported as
//! `FO_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fairover::dataset::{imbalance_degrees, partition_clusters};
use fairover::metrics::{balanced_accuracy, confusion, equal_opportunity, equalized_odds, statistical_parity};
use fairover::{Dataset, DatasetSchema, Error, OversamplerConfig, Technique};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Validation = 3,
    Io = 4,
    Runtime = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FoTechnique {
    Original = 0,
    Smote = 1,
    Fsmote = 2,
    Fbsmote = 3,
    Fadasyn = 4,
    HeteroFair = 5,
}

impl From<FoTechnique> for Technique {
    fn from(t: FoTechnique) -> Self {
        match t {
            FoTechnique::Original => Technique::None,
            FoTechnique::Smote => Technique::Smote,
            FoTechnique::Fsmote => Technique::Fsmote,
            FoTechnique::Fbsmote => Technique::Fbsmote,
            FoTechnique::Fadasyn => Technique::Fadasyn,
            FoTechnique::HeteroFair => Technique::HeteroFair,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FoMetric {
    StatisticalParity = 0,
    EqualOpportunity = 1,
    EqualizedOdds = 2,
}

/// Opaque dataset handle.
pub struct FoDataset {
    inner: Dataset,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &Error) -> FoStatus {
    match err {
        Error::Io { .. } => FoStatus::Io,
        e if e.is_validation() => FoStatus::Validation,
        _ => FoStatus::Runtime,
    }
}

struct Failure(FoStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(FoStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f` with panic containment and last-error bookkeeping.
fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> FoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            clear_error();
            FoStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            FoStatus::Panic
        }
    }
}

unsafe fn path_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(FoStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn dataset_arg<'a>(ds: *const FoDataset) -> Result<&'a Dataset, Failure> {
    ds.as_ref().map(|d| &d.inner).ok_or_else(|| null("dataset"))
}

fn hand_out(ds: Dataset, out: *mut *mut FoDataset) {
    // SAFETY: callers check `out` for null before building the dataset.
    unsafe { *out = Box::into_raw(Box::new(FoDataset { inner: ds })) };
}

/// Message describing the most recent failure on this thread, or null after
/// a successful call. Valid until the next fairover call on this thread.
#[no_mangle]
pub extern "C" fn fo_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Loads a CSV file described by a TOML schema file.
///
/// # Safety
/// `csv_path` and `schema_path` must be null or NUL-terminated strings;
/// `out` must be null or point to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn fo_dataset_load_csv(
    csv_path: *const c_char,
    schema_path: *const c_char,
    out: *mut *mut FoDataset,
) -> FoStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let csv = path_arg(csv_path, "csv_path")?;
        let schema = DatasetSchema::load(path_arg(schema_path, "schema_path")?)?;
        hand_out(Dataset::load_csv(csv, &schema)?, out);
        Ok(())
    })
}

/// Builds a dataset from a row-major `n x d` feature array, `n` labels
/// (0 or 1) and `n` group ids below `m`. The inputs are copied.
///
/// # Safety
/// Each pointer must be null or valid for the stated number of elements.
#[no_mangle]
pub unsafe extern "C" fn fo_dataset_from_arrays(
    features: *const f64,
    n: usize,
    d: usize,
    labels: *const u8,
    groups: *const usize,
    m: usize,
    out: *mut *mut FoDataset,
) -> FoStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let len = n
            .checked_mul(d)
            .ok_or_else(|| Failure(FoStatus::InvalidArgument, "n * d overflows".into()))?;
        let x = slice_arg(features, len, "features")?.to_vec();
        let y = slice_arg(labels, n, "labels")?.to_vec();
        let g = slice_arg(groups, n, "groups")?.to_vec();
        hand_out(Dataset::new(x, d, y, g, m)?, out);
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `ds` must be null or a handle returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fo_dataset_free(ds: *mut FoDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Number of instances, or 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fo_dataset_len(ds: *const FoDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.n())
}

/// Feature dimension, or 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fo_dataset_dim(ds: *const FoDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.d())
}

/// Number of groups, or 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fo_dataset_groups(ds: *const FoDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.m())
}

unsafe fn copy_out<T: Copy>(src: &[T], dst: *mut T, len: usize) -> Result<(), Failure> {
    if dst.is_null() {
        return Err(null("destination buffer"));
    }
    if len < src.len() {
        return Err(Failure(
            FoStatus::InvalidArgument,
            format!("buffer holds {len} elements, {} needed", src.len()),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    Ok(())
}

/// Copies the row-major features (`len >= n * d`).
///
/// # Safety
/// `ds` must be null or a live handle; `out` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn fo_dataset_copy_features(ds: *const FoDataset, out: *mut f64, len: usize) -> FoStatus {
    guard(|| copy_out(dataset_arg(ds)?.features(), out, len))
}

/// Copies the labels (`len >= n`).
///
/// # Safety
/// `ds` must be null or a live handle; `out` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn fo_dataset_copy_labels(ds: *const FoDataset, out: *mut u8, len: usize) -> FoStatus {
    guard(|| copy_out(dataset_arg(ds)?.labels(), out, len))
}

/// Copies the group ids (`len >= n`).
///
/// # Safety
/// `ds` must be null or a live handle; `out` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn fo_dataset_copy_groups(ds: *const FoDataset, out: *mut usize, len: usize) -> FoStatus {
    guard(|| copy_out(dataset_arg(ds)?.groups(), out, len))
}

/// Writes `2 * m` imbalance degrees; entry `class * m + group` belongs to
/// that cluster.
///
/// # Safety
/// `ds` must be null or a live handle; `out` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn fo_dataset_imbalance_degrees(ds: *const FoDataset, out: *mut usize, len: usize) -> FoStatus {
    guard(|| {
        let ds = dataset_arg(ds)?;
        let degrees = imbalance_degrees(&partition_clusters(ds));
        let m = ds.m();
        let mut flat = vec![0usize; 2 * m];
        for (key, deg) in degrees {
            flat[key.class as usize * m + key.group] = deg;
        }
        copy_out(&flat, out, len)
    })
}

/// Writes the dataset as CSV, without provenance columns.
///
/// # Safety
/// `ds` must be null or a live handle; `path` null or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn fo_dataset_save_csv(ds: *const FoDataset, path: *const c_char) -> FoStatus {
    guard(|| {
        let ds = dataset_arg(ds)?;
        ds.save_csv(path_arg(path, "path")?, None)?;
        Ok(())
    })
}

/// Oversamples `ds` into a new handle. The first `n` rows of the result are
/// the input rows in order; synthetic rows follow. Protected-attribute
/// feature columns are copied from the source instance.
///
/// # Safety
/// `ds` must be null or a live handle; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn fo_oversample(
    ds: *const FoDataset,
    technique: FoTechnique,
    k: usize,
    seed: u64,
    out: *mut *mut FoDataset,
) -> FoStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let ds = dataset_arg(ds)?;
        let cfg = OversamplerConfig::new(technique.into(), k, seed);
        let aug = fairover::oversample(ds, &cfg)?;
        hand_out(aug.dataset, out);
        Ok(())
    })
}

/// Balanced accuracy of binary predictions.
///
/// # Safety
/// `y_true` and `y_pred` must be valid for `n` reads; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fo_balanced_accuracy(
    y_true: *const u8,
    y_pred: *const u8,
    n: usize,
    out: *mut f64,
) -> FoStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cm = confusion(slice_arg(y_true, n, "y_true")?, slice_arg(y_pred, n, "y_pred")?)?;
        *out = balanced_accuracy(&cm)?;
        Ok(())
    })
}

/// Disparity (max minus min over groups) of a group fairness metric.
/// `y_true` may be null for statistical parity.
///
/// # Safety
/// Non-null arrays must be valid for `n` reads; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fo_disparity(
    metric: FoMetric,
    y_true: *const u8,
    y_pred: *const u8,
    groups: *const usize,
    n: usize,
    m: usize,
    out: *mut f64,
) -> FoStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let p = slice_arg(y_pred, n, "y_pred")?;
        let g = slice_arg(groups, n, "groups")?;
        let set = match metric {
            FoMetric::StatisticalParity => statistical_parity(p, g, m)?,
            FoMetric::EqualOpportunity => equal_opportunity(slice_arg(y_true, n, "y_true")?, p, g, m)?,
            FoMetric::EqualizedOdds => equalized_odds(slice_arg(y_true, n, "y_true")?, p, g, m)?,
        };
        *out = set.disparity;
        Ok(())
    })
}
