//! C ABI over the dsakt crate: load a trained checkpoint behind an opaque
//! handle and score next-answer probabilities from other languages.
//!
//! Conventions: every function returns a `DsaktStatus`; results come back
//! through out-pointers; `dsakt_last_error_message` retrieves a per-thread
//! description of the most recent failure. Handles must be released with
//! `dsakt_model_free`.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use dsakt::cli::predict_next;
use dsakt::data::{Interaction, Vocabulary};
use dsakt::error::Error;
use dsakt::model::{load_checkpoint, Model};

/// Status codes returned by every FFI entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DsaktStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    IoError = 3,
    BadCheckpoint = 4,
    UnknownExercise = 5,
    InvalidInput = 6,
    NumericError = 7,
}

/// Opaque model handle: a loaded checkpoint plus its vocabulary.
pub struct DsaktModel {
    model: Model<f32>,
    vocabulary: Vocabulary,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let sanitized: String = msg.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> DsaktStatus {
    match err {
        Error::Io(_) => DsaktStatus::IoError,
        Error::CheckpointMagic(_) | Error::CheckpointShape { .. }
        | Error::CheckpointTruncated(_) => DsaktStatus::BadCheckpoint,
        Error::UnknownExercise(_) => DsaktStatus::UnknownExercise,
        Error::NonFinite(_) | Error::NonFiniteLoss { .. } => DsaktStatus::NumericError,
        _ => DsaktStatus::InvalidInput,
    }
}

unsafe fn cstr<'a>(ptr: *const c_char) -> Result<&'a str, DsaktStatus> {
    if ptr.is_null() {
        set_error("null string argument");
        return Err(DsaktStatus::NullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8");
        DsaktStatus::InvalidUtf8
    })
}

/// Load a checkpoint file. On success writes a handle to `out_model`; the
/// caller owns it and must release it with `dsakt_model_free`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out_model` must be a valid
/// pointer to writable memory.
#[no_mangle]
pub unsafe extern "C" fn dsakt_model_load(
    path: *const c_char,
    out_model: *mut *mut DsaktModel,
) -> DsaktStatus {
    if out_model.is_null() {
        set_error("out_model is null");
        return DsaktStatus::NullArgument;
    }
    let path = match cstr(path) {
        Ok(p) => p,
        Err(s) => return s,
    };
    let result = catch_unwind(AssertUnwindSafe(|| {
        let (config, params, vocabulary) = load_checkpoint(path)?;
        let model = Model::new(config, params)?;
        Ok::<_, Error>(DsaktModel { model, vocabulary })
    }));
    match result {
        Ok(Ok(handle)) => {
            *out_model = Box::into_raw(Box::new(handle));
            DsaktStatus::Ok
        }
        Ok(Err(err)) => {
            set_error(&err.to_string());
            status_of(&err)
        }
        Err(_) => {
            set_error("internal panic while loading checkpoint");
            DsaktStatus::NumericError
        }
    }
}

/// Release a handle obtained from `dsakt_model_load`. Null is a no-op.
///
/// # Safety
/// `model` must be null or a pointer previously returned by
/// `dsakt_model_load` that has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn dsakt_model_free(model: *mut DsaktModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of distinct exercises in the model's vocabulary; 0 for null.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dsakt_model_exercise_count(model: *const DsaktModel) -> u64 {
    model
        .as_ref()
        .map(|m| u64::from(m.vocabulary.exercise_count()))
        .unwrap_or(0)
}

/// Window length the model was trained with; 0 for null.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dsakt_model_window_len(model: *const DsaktModel) -> u64 {
    model
        .as_ref()
        .map(|m| m.model.config.window_len as u64)
        .unwrap_or(0)
}

/// Index of an exercise id in the model's vocabulary, or -1 if unknown,
/// or -2 on a bad argument.
///
/// # Safety
/// `model` must be a live handle; `exercise_id` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn dsakt_vocab_index(
    model: *const DsaktModel,
    exercise_id: *const c_char,
) -> i64 {
    let Some(handle) = model.as_ref() else {
        return -2;
    };
    let Ok(id) = cstr(exercise_id) else {
        return -2;
    };
    handle
        .vocabulary
        .index_of(id)
        .map(i64::from)
        .unwrap_or(-1)
}

/// Probability that the student answers `next_id` correctly, given a
/// history of `len` (exercise id, correctness) pairs ordered oldest first.
/// Histories longer than the model window keep the most recent interactions.
///
/// # Safety
/// `model` must be a live handle; `exercise_ids` must point to `len`
/// NUL-terminated strings; `corrects` to `len` bytes that are 0 or 1;
/// `next_id` must be NUL-terminated; `out_prob` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dsakt_predict(
    model: *const DsaktModel,
    exercise_ids: *const *const c_char,
    corrects: *const u8,
    len: usize,
    next_id: *const c_char,
    out_prob: *mut f64,
) -> DsaktStatus {
    let Some(handle) = model.as_ref() else {
        set_error("model handle is null");
        return DsaktStatus::NullArgument;
    };
    if out_prob.is_null() || (len > 0 && (exercise_ids.is_null() || corrects.is_null())) {
        set_error("null output or history pointer");
        return DsaktStatus::NullArgument;
    }
    if len == 0 {
        set_error("history must contain at least one interaction");
        return DsaktStatus::InvalidInput;
    }
    let next = match cstr(next_id) {
        Ok(id) => id,
        Err(s) => return s,
    };
    let Some(next_index) = handle.vocabulary.index_of(next) else {
        set_error(&format!("unknown exercise id `{next}`"));
        return DsaktStatus::UnknownExercise;
    };

    let mut history = Vec::with_capacity(len);
    for i in 0..len {
        let id = match cstr(*exercise_ids.add(i)) {
            Ok(id) => id,
            Err(s) => return s,
        };
        let Some(exercise) = handle.vocabulary.index_of(id) else {
            set_error(&format!("unknown exercise id `{id}`"));
            return DsaktStatus::UnknownExercise;
        };
        let correct = *corrects.add(i);
        if correct > 1 {
            set_error(&format!("correctness flag {correct} is not 0 or 1"));
            return DsaktStatus::InvalidInput;
        }
        history.push(Interaction { exercise, correct });
    }

    let result = catch_unwind(AssertUnwindSafe(|| {
        predict_next(&handle.model, &history, next_index)
    }));
    match result {
        Ok(Ok(prob)) => {
            *out_prob = prob;
            DsaktStatus::Ok
        }
        Ok(Err(err)) => {
            set_error(&err.to_string());
            status_of(&err)
        }
        Err(_) => {
            set_error("internal panic while predicting");
            DsaktStatus::NumericError
        }
    }
}

/// Copy the most recent error message on this thread into `buf` (truncated
/// to `cap - 1` bytes, always NUL-terminated). Returns the full message
/// length in bytes, excluding the NUL.
///
/// # Safety
/// `buf` must point to `cap` writable bytes, or be null (length query).
#[no_mangle]
pub unsafe extern "C" fn dsakt_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Static library version string; do not free.
#[no_mangle]
pub extern "C" fn dsakt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}
