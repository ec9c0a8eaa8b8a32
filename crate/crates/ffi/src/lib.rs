//! C ABI over the `jacobi-decay` library.
//!
//! Models are built from the same JSON accepted by the CLI and handed out as
//! opaque `JdModel` pointers. Every entry point returns a `JdStatus`; on
//! failure the message is kept per thread and read with
//! `jd_last_error_message`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use jacobi_decay::error::Error;
use jacobi_decay::model::{truncate, ModelSpec};
use jacobi_decay::tridiag::{eigs_in_window, resolvent_column, sturm_count, SpectrumQuery};
use num_complex::Complex64;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidModel = 3,
    InvalidArgument = 4,
    NearSingular = 5,
    BufferTooSmall = 6,
    Numerical = 7,
    Panic = 8,
}

/// Opaque model handle.
pub struct JdModel {
    spec: ModelSpec,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(err: &Error) -> JdStatus {
    match err {
        Error::InvalidModel(_) | Error::NonPositiveWeight { .. } | Error::Config(_) => JdStatus::InvalidModel,
        Error::NearSingular { .. } => JdStatus::NearSingular,
        Error::IndexOutOfWindow { .. } => JdStatus::InvalidArgument,
        _ => JdStatus::Numerical,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (JdStatus, String)>) -> JdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            JdStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            JdStatus::Panic
        }
    }
}

fn lib_err(err: Error) -> (JdStatus, String) {
    (status_of(&err), err.to_string())
}

fn null() -> (JdStatus, String) {
    (JdStatus::NullPointer, "null pointer argument".to_string())
}

unsafe fn model_ref<'a>(model: *const JdModel) -> Result<&'a JdModel, (JdStatus, String)> {
    model.as_ref().ok_or_else(null)
}

/// Parses a JSON model description into a new handle written to `out`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn jd_model_from_json(json: *const c_char, out: *mut *mut JdModel) -> JdStatus {
    guard(|| {
        if json.is_null() || out.is_null() {
            return Err(null());
        }
        *out = ptr::null_mut();
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| (JdStatus::InvalidUtf8, e.to_string()))?;
        let spec: ModelSpec = serde_json::from_str(text).map_err(|e| (JdStatus::InvalidModel, e.to_string()))?;
        spec.validate().map_err(lib_err)?;
        *out = Box::into_raw(Box::new(JdModel { spec }));
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `model` must come from `jd_model_from_json` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn jd_model_free(model: *mut JdModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Off-diagonal weight λ_n and diagonal entry q_n at row `n` (1-based).
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn jd_model_entry(
    model: *const JdModel,
    n: usize,
    weight: *mut f64,
    diag: *mut f64,
) -> JdStatus {
    guard(|| {
        let m = model_ref(model)?;
        if weight.is_null() || diag.is_null() {
            return Err(null());
        }
        if n == 0 {
            return Err((JdStatus::InvalidArgument, "rows are 1-based".into()));
        }
        let (w, q) = m.spec.sample(n).map_err(lib_err)?;
        *weight = w;
        *diag = q;
        Ok(())
    })
}

/// First column of (J_N − z)⁻¹ on rows 1..=`n`, written to `re` and `im`,
/// each of length at least `n`.
///
/// # Safety
/// `re` and `im` must point to `n` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn jd_resolvent_column(
    model: *const JdModel,
    n: usize,
    z_re: f64,
    z_im: f64,
    re: *mut f64,
    im: *mut f64,
) -> JdStatus {
    guard(|| {
        let m = model_ref(model)?;
        if re.is_null() || im.is_null() {
            return Err(null());
        }
        if n == 0 {
            return Err((JdStatus::InvalidArgument, "n must be positive".into()));
        }
        let slice = truncate(&m.spec, 1, n).map_err(lib_err)?;
        let column = resolvent_column(&slice, Complex64::new(z_re, z_im)).map_err(lib_err)?;
        let re = std::slice::from_raw_parts_mut(re, n);
        let im = std::slice::from_raw_parts_mut(im, n);
        for (i, v) in column.values.iter().enumerate() {
            re[i] = v.re;
            im[i] = v.im;
        }
        Ok(())
    })
}

/// Number of eigenvalues of the section on rows `lo..=hi` lying below `x`.
///
/// # Safety
/// `count` must be valid.
#[no_mangle]
pub unsafe extern "C" fn jd_sturm_count(
    model: *const JdModel,
    lo: usize,
    hi: usize,
    x: f64,
    count: *mut usize,
) -> JdStatus {
    guard(|| {
        let m = model_ref(model)?;
        if count.is_null() {
            return Err(null());
        }
        check_rows(lo, hi)?;
        let slice = truncate(&m.spec, lo, hi).map_err(lib_err)?;
        *count = sturm_count(&slice, x);
        Ok(())
    })
}

/// Eigenvalues of the section on rows `lo..=hi` inside `(a, b)`, ascending.
/// `*len` is set to the number found. If it exceeds `capacity` nothing is
/// written and `BufferTooSmall` is returned.
///
/// # Safety
/// `out` must point to `capacity` writable doubles; `len` must be valid.
#[no_mangle]
pub unsafe extern "C" fn jd_eigenvalues_in_window(
    model: *const JdModel,
    lo: usize,
    hi: usize,
    a: f64,
    b: f64,
    out: *mut f64,
    capacity: usize,
    len: *mut usize,
) -> JdStatus {
    guard(|| {
        let m = model_ref(model)?;
        if len.is_null() || (out.is_null() && capacity > 0) {
            return Err(null());
        }
        check_rows(lo, hi)?;
        if !(a < b) {
            return Err((JdStatus::InvalidArgument, "window must satisfy a < b".into()));
        }
        let slice = truncate(&m.spec, lo, hi).map_err(lib_err)?;
        let eigs = eigs_in_window(&SpectrumQuery::new(&slice), a, b);
        *len = eigs.len();
        if eigs.len() > capacity {
            return Err((
                JdStatus::BufferTooSmall,
                format!("{} eigenvalues, capacity {capacity}", eigs.len()),
            ));
        }
        if !eigs.is_empty() {
            std::slice::from_raw_parts_mut(out, eigs.len()).copy_from_slice(&eigs);
        }
        Ok(())
    })
}

fn check_rows(lo: usize, hi: usize) -> Result<(), (JdStatus, String)> {
    if lo == 0 || lo > hi {
        Err((JdStatus::InvalidArgument, "rows must satisfy 1 <= lo <= hi".into()))
    } else {
        Ok(())
    }
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `capacity`). Returns the full message length in bytes.
///
/// # Safety
/// `buf` must point to `capacity` writable bytes, or be null with
/// `capacity == 0`.
#[no_mangle]
pub unsafe extern "C" fn jd_last_error_message(buf: *mut c_char, capacity: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && capacity > 0 {
            let n = msg.len().min(capacity - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn jd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
