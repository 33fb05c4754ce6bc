//! C ABI for the consens library.
//!
//! The surface is a flat set of `extern "C"` functions over raw buffers and
//! opaque handles. Every fallible call returns a [`ConsensStatus`]; on
//! failure a thread-local message is retrievable with
//! [`consens_last_error_message`]. Heap objects returned by this library
//! (matrices, strings) must be released with their matching `_free`
//! function. The matching header is generated into `include/consens.h` at
//! build time.

use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use consens::bounds::{monte_carlo_suite, SuiteConfig};
use consens::ensemble::{ideal_beta, prune_threshold};
use consens::error::Error;
use consens::metrics::{pair_report, LabelVector, PredictionMatrix};
use consens::simplex::{
    euclidean_distance, minkowski_distance, triple_distance, MinkowskiOrder, SimplexVector,
};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConsensStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ParseError = 3,
    IoError = 4,
    InternalError = 5,
}

thread_local! {
    static LAST_ERROR: std::cell::RefCell<Option<CString>> = const { std::cell::RefCell::new(None) };
}

fn set_error(message: String) {
    let cstring = CString::new(message).unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(cstring));
}

fn status_of(err: &Error) -> ConsensStatus {
    match err {
        Error::InvalidArgument(_)
        | Error::InvalidConfig(_)
        | Error::InvalidState(_)
        | Error::TrainingDiverged { .. }
        | Error::CannotFillEnsemble(_) => ConsensStatus::InvalidArgument,
        Error::Parse { .. } => ConsensStatus::ParseError,
        Error::Io(_) => ConsensStatus::IoError,
    }
}

fn fail(err: Error) -> ConsensStatus {
    let status = status_of(&err);
    set_error(err.to_string());
    status
}

/// Runs a fallible body, converting errors and panics to status codes.
fn guarded<F: FnOnce() -> Result<(), ConsensStatus>>(body: F) -> ConsensStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => ConsensStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => {
            set_error("internal panic".to_string());
            ConsensStatus::InternalError
        }
    }
}

unsafe fn slice_arg<'a, T>(ptr: *const T, len: usize) -> Result<&'a [T], ConsensStatus> {
    if ptr.is_null() {
        set_error("null pointer argument".to_string());
        return Err(ConsensStatus::NullPointer);
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn out_arg<'a, T>(ptr: *mut T) -> Result<&'a mut T, ConsensStatus> {
    if ptr.is_null() {
        set_error("null output pointer".to_string());
        return Err(ConsensStatus::NullPointer);
    }
    Ok(&mut *ptr)
}

fn simplex_arg(values: &[f64]) -> Result<SimplexVector, ConsensStatus> {
    SimplexVector::new(values.to_vec()).map_err(|e| {
        let status = status_of(&e);
        set_error(e.to_string());
        status
    })
}

/// Most recent error message on this thread, or NULL when no error has
/// occurred. The caller owns the string and must release it with
/// [`consens_string_free`].
#[no_mangle]
pub extern "C" fn consens_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(std::ptr::null_mut(), |msg| msg.clone().into_raw())
    })
}

/// Releases a string allocated by this library.
///
/// # Safety
/// `s` must have been returned by a consens function and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn consens_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Euclidean distance between two probability vectors of length `dim`.
///
/// # Safety
/// `a` and `b` must point to `dim` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn consens_euclidean_distance(
    a: *const f64,
    b: *const f64,
    dim: usize,
    out: *mut f64,
) -> ConsensStatus {
    guarded(|| {
        let a = simplex_arg(slice_arg(a, dim)?)?;
        let b = simplex_arg(slice_arg(b, dim)?)?;
        let out = out_arg(out)?;
        *out = euclidean_distance(&a, &b).map_err(fail)?;
        Ok(())
    })
}

/// Minkowski distance of order `order >= 1` between two probability vectors.
///
/// # Safety
/// `a` and `b` must point to `dim` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn consens_minkowski_distance(
    a: *const f64,
    b: *const f64,
    dim: usize,
    order: f64,
    out: *mut f64,
) -> ConsensStatus {
    guarded(|| {
        let a = simplex_arg(slice_arg(a, dim)?)?;
        let b = simplex_arg(slice_arg(b, dim)?)?;
        let q = MinkowskiOrder::new(order).map_err(fail)?;
        let out = out_arg(out)?;
        *out = minkowski_distance(&a, &b, q).map_err(fail)?;
        Ok(())
    })
}

/// Sum of the pairwise distances among a prediction, its retrained copy, and
/// the one-hot truth vector.
///
/// # Safety
/// All three vectors must point to `dim` readable doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn consens_triple_distance(
    s: *const f64,
    s_copy: *const f64,
    truth: *const f64,
    dim: usize,
    out: *mut f64,
) -> ConsensStatus {
    guarded(|| {
        let s = simplex_arg(slice_arg(s, dim)?)?;
        let s_copy = simplex_arg(slice_arg(s_copy, dim)?)?;
        let truth = simplex_arg(slice_arg(truth, dim)?)?;
        let out = out_arg(out)?;
        *out = triple_distance(&s, &s_copy, &truth).map_err(fail)?;
        Ok(())
    })
}

/// Prune threshold `(1-beta) * max(w) + beta * min(w)`.
///
/// # Safety
/// `weights` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn consens_prune_threshold(
    weights: *const f64,
    len: usize,
    beta: f64,
    out: *mut f64,
) -> ConsensStatus {
    guarded(|| {
        let weights = slice_arg(weights, len)?;
        let out = out_arg(out)?;
        *out = prune_threshold(weights, beta).map_err(fail)?;
        Ok(())
    })
}

/// The prune factor whose threshold equals the mean of `weights`.
///
/// # Safety
/// `weights` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn consens_ideal_beta(
    weights: *const f64,
    len: usize,
    out: *mut f64,
) -> ConsensStatus {
    guarded(|| {
        let weights = slice_arg(weights, len)?;
        let out = out_arg(out)?;
        *out = ideal_beta(weights).map_err(fail)?;
        Ok(())
    })
}

/// One learner's predictions over a test set (opaque handle).
pub struct ConsensPredictionMatrix(PredictionMatrix);

/// Builds a prediction matrix from a dense row-major `rows x classes`
/// buffer; every row must lie on the probability simplex.
///
/// # Safety
/// `data` must point to `rows * classes` readable doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn consens_prediction_matrix_new(
    data: *const f64,
    rows: usize,
    classes: usize,
    out: *mut *mut ConsensPredictionMatrix,
) -> ConsensStatus {
    guarded(|| {
        let out = out_arg(out)?;
        let data = slice_arg(data, rows.saturating_mul(classes))?;
        let raw: Vec<Vec<f64>> = data.chunks(classes.max(1)).map(<[f64]>::to_vec).collect();
        let matrix = PredictionMatrix::from_raw(raw).map_err(fail)?;
        *out = Box::into_raw(Box::new(ConsensPredictionMatrix(matrix)));
        Ok(())
    })
}

/// Loads a prediction matrix from the `n p` header text format.
///
/// # Safety
/// `path` must be a valid NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn consens_prediction_matrix_load(
    path: *const c_char,
    out: *mut *mut ConsensPredictionMatrix,
) -> ConsensStatus {
    guarded(|| {
        let out = out_arg(out)?;
        if path.is_null() {
            set_error("null path".to_string());
            return Err(ConsensStatus::NullPointer);
        }
        let path = CStr::from_ptr(path).to_str().map_err(|_| {
            set_error("path is not valid UTF-8".to_string());
            ConsensStatus::InvalidArgument
        })?;
        let matrix = PredictionMatrix::load(std::path::Path::new(path)).map_err(fail)?;
        *out = Box::into_raw(Box::new(ConsensPredictionMatrix(matrix)));
        Ok(())
    })
}

/// Releases a prediction matrix handle.
///
/// # Safety
/// `matrix` must have come from a consens constructor and not yet be freed.
#[no_mangle]
pub unsafe extern "C" fn consens_prediction_matrix_free(matrix: *mut ConsensPredictionMatrix) {
    if !matrix.is_null() {
        drop(Box::from_raw(matrix));
    }
}

/// Number of rows (test inputs), or 0 for NULL.
///
/// # Safety
/// `matrix` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn consens_prediction_matrix_rows(matrix: *const ConsensPredictionMatrix) -> usize {
    matrix.as_ref().map_or(0, |m| m.0.n())
}

/// Number of classes (row dimension), or 0 for NULL.
///
/// # Safety
/// `matrix` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn consens_prediction_matrix_classes(matrix: *const ConsensPredictionMatrix) -> usize {
    matrix.as_ref().map_or(0, |m| m.0.p())
}

unsafe fn matrix_arg<'a>(
    ptr: *const ConsensPredictionMatrix,
) -> Result<&'a PredictionMatrix, ConsensStatus> {
    match ptr.as_ref() {
        Some(wrapper) => Ok(&wrapper.0),
        None => {
            set_error("null prediction matrix".to_string());
            Err(ConsensStatus::NullPointer)
        }
    }
}

fn labels_arg(labels: &[usize]) -> Result<LabelVector, ConsensStatus> {
    LabelVector::new(labels.to_vec()).map_err(|e| {
        let status = status_of(&e);
        set_error(e.to_string());
        status
    })
}

/// Fraction of rows where the two matrices pick the same class.
///
/// # Safety
/// `a` and `b` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn consens_consistency(
    a: *const ConsensPredictionMatrix,
    b: *const ConsensPredictionMatrix,
    out: *mut f64,
) -> ConsensStatus {
    guarded(|| {
        let a = matrix_arg(a)?;
        let b = matrix_arg(b)?;
        let out = out_arg(out)?;
        *out = consens::metrics::consistency(a, b).map_err(fail)?;
        Ok(())
    })
}

/// Fraction of rows whose argmax equals the label.
///
/// # Safety
/// `a` must be a live handle; `labels` must point to `len` readable values;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn consens_accuracy(
    a: *const ConsensPredictionMatrix,
    labels: *const usize,
    len: usize,
    out: *mut f64,
) -> ConsensStatus {
    guarded(|| {
        let a = matrix_arg(a)?;
        let labels = labels_arg(slice_arg(labels, len)?)?;
        let out = out_arg(out)?;
        *out = consens::metrics::accuracy(a, &labels).map_err(fail)?;
        Ok(())
    })
}

fn json_out(out: &mut *mut c_char, text: String) -> Result<(), ConsensStatus> {
    let cstring = CString::new(text).map_err(|_| {
        set_error("JSON contained an interior NUL".to_string());
        ConsensStatus::InternalError
    })?;
    *out = cstring.into_raw();
    Ok(())
}

/// The full pairwise metric report between two learners as a flat JSON
/// object with snake_case keys.
///
/// # Safety
/// `a`, `b` must be live handles; `labels` must hold `len` values; `ks` must
/// hold `ks_len` values; `out_json` must be writable. Free the string with
/// [`consens_string_free`].
#[no_mangle]
pub unsafe extern "C" fn consens_pair_report_json(
    a: *const ConsensPredictionMatrix,
    b: *const ConsensPredictionMatrix,
    labels: *const usize,
    len: usize,
    ks: *const usize,
    ks_len: usize,
    out_json: *mut *mut c_char,
) -> ConsensStatus {
    guarded(|| {
        let a = matrix_arg(a)?;
        let b = matrix_arg(b)?;
        let labels = labels_arg(slice_arg(labels, len)?)?;
        let ks = slice_arg(ks, ks_len)?;
        let out = out_arg(out_json)?;
        let report = pair_report(a, b, &labels, ks).map_err(fail)?;
        let json = serde_json::to_string_pretty(&report.to_flat_map()).map_err(|e| {
            set_error(format!("serialization failed: {e}"));
            ConsensStatus::InternalError
        })?;
        json_out(out, json)
    })
}

/// Runs the Monte Carlo bound-verification suite and returns its JSON
/// report. `trials` drives the Euclidean checks, `minkowski_trials` each of
/// the generalized-order checks.
///
/// # Safety
/// `out_json` must be writable. Free the string with [`consens_string_free`].
#[no_mangle]
pub unsafe extern "C" fn consens_verify_bounds_json(
    trials: u64,
    minkowski_trials: u64,
    seed: u64,
    out_json: *mut *mut c_char,
) -> ConsensStatus {
    guarded(|| {
        let out = out_arg(out_json)?;
        let cfg = SuiteConfig { trials, minkowski_trials, seed, ..SuiteConfig::default() };
        let report = monte_carlo_suite(&cfg).map_err(fail)?;
        json_out(out, report.to_json())
    })
}
