//! C ABI over `koopman-roa`: run pipelines, inspect and combine certificates.
//!
//! Every fallible call returns a [`KrStatus`]; on failure the message is available from
//! [`kr_last_error_message`] on the same thread. Handles are opaque and owned by the caller
//! until passed to their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use koopman_roa::config::RunConfig;
use koopman_roa::roa::{combine, run_pipeline, Certificate, CombinedCertificate};
use koopman_roa::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KrStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidConfig = 3,
    InvalidArgument = 4,
    NotHurwitz = 5,
    NumericalFailure = 6,
    Incompatible = 7,
    NestingViolated = 8,
    Io = 9,
    Panic = 10,
}

/// A certificate; free with [`kr_certificate_free`].
pub struct KrCertificate(Certificate);

/// Certificates whose nesting was verified; free with [`kr_combined_free`].
pub struct KrCombined(CombinedCertificate);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> KrStatus {
    match e {
        Error::Config { .. } | Error::Json(_) => KrStatus::InvalidConfig,
        Error::NotHurwitz(_) => KrStatus::NotHurwitz,
        Error::Incompatible(_) | Error::DimensionMismatch { .. } => KrStatus::Incompatible,
        Error::NestingViolated { .. } => KrStatus::NestingViolated,
        Error::Io(_) | Error::Csv(_) => KrStatus::Io,
        Error::NonFinite(_)
        | Error::Eigen(_)
        | Error::SingularGram(_)
        | Error::LpInfeasible
        | Error::LpUnbounded
        | Error::LpIterationLimit(_) => KrStatus::NumericalFailure,
        _ => KrStatus::InvalidArgument,
    }
}

fn fail(e: Error) -> KrStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

fn guard<F: FnOnce() -> KrStatus>(f: F) -> KrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            KrStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, KrStatus> {
    if s.is_null() {
        set_error("null string argument".into());
        return Err(KrStatus::NullArgument);
    }
    CStr::from_ptr(s).to_str().map_err(|_| {
        set_error("string argument is not UTF-8".into());
        KrStatus::InvalidUtf8
    })
}

fn null_arg(name: &str) -> KrStatus {
    set_error(format!("null argument `{name}`"));
    KrStatus::NullArgument
}

/// Message of the last failure on this thread, or null. Valid until the next failing call.
#[no_mangle]
pub extern "C" fn kr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn kr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Runs the pipeline described by a JSON run configuration.
///
/// # Safety
/// `config_json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kr_certify_json(config_json: *const c_char, out: *mut *mut KrCertificate) -> KrStatus {
    guard(|| {
        if out.is_null() {
            return null_arg("out");
        }
        let text = match read_str(config_json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let cert = match RunConfig::from_json(text).and_then(|c| run_pipeline(&c)) {
            Ok(c) => c,
            Err(e) => return fail(e),
        };
        *out = Box::into_raw(Box::new(KrCertificate(cert)));
        KrStatus::Ok
    })
}

/// Parses a certificate previously written as JSON.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kr_certificate_from_json(json: *const c_char, out: *mut *mut KrCertificate) -> KrStatus {
    guard(|| {
        if out.is_null() {
            return null_arg("out");
        }
        let text = match read_str(json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match serde_json::from_str::<Certificate>(text) {
            Ok(c) => {
                *out = Box::into_raw(Box::new(KrCertificate(c)));
                KrStatus::Ok
            }
            Err(e) => fail(Error::Json(e)),
        }
    })
}

/// Serialises a certificate; free the result with [`kr_string_free`]. Null on failure.
///
/// # Safety
/// `cert` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn kr_certificate_to_json(cert: *const KrCertificate) -> *mut c_char {
    let Some(c) = cert.as_ref() else {
        null_arg("cert");
        return ptr::null_mut();
    };
    match serde_json::to_string(&c.0) {
        Ok(s) => CString::new(s).map_or(ptr::null_mut(), CString::into_raw),
        Err(e) => {
            fail(Error::Json(e));
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `cert` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn kr_certificate_is_certified(cert: *const KrCertificate) -> bool {
    cert.as_ref().is_some_and(|c| c.0.certified)
}

/// State dimension, or 0 for a null handle.
///
/// # Safety
/// `cert` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn kr_certificate_dim(cert: *const KrCertificate) -> usize {
    cert.as_ref().map_or(0, |c| c.0.dim())
}

/// Writes `γ₁` and `γ₂` (levels of the rescaled `V`).
///
/// # Safety
/// `cert` must be a live handle; `gamma1` and `gamma2` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn kr_certificate_levels(cert: *const KrCertificate, gamma1: *mut f64, gamma2: *mut f64) -> KrStatus {
    let Some(c) = cert.as_ref() else { return null_arg("cert") };
    if gamma1.is_null() || gamma2.is_null() {
        return null_arg("gamma");
    }
    *gamma1 = c.0.gamma1;
    *gamma2 = c.0.gamma2;
    KrStatus::Ok
}

/// `V(x)` at a point given in original coordinates.
///
/// # Safety
/// `x` must point to `n` readable values and `value` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kr_certificate_eval(
    cert: *const KrCertificate,
    x: *const f64,
    n: usize,
    value: *mut f64,
) -> KrStatus {
    guard(|| {
        let Some(c) = cert.as_ref() else { return null_arg("cert") };
        if x.is_null() || value.is_null() {
            return null_arg("x");
        }
        if n != c.0.dim() {
            return fail(Error::DimensionMismatch { expected: c.0.dim(), got: n });
        }
        *value = c.0.v_original_at(std::slice::from_raw_parts(x, n));
        KrStatus::Ok
    })
}

/// # Safety
/// `cert` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn kr_certificate_free(cert: *mut KrCertificate) {
    if !cert.is_null() {
        drop(Box::from_raw(cert));
    }
}

/// Checks the nesting of `count` certificates on `samples` points. On
/// [`KrStatus::NestingViolated`] the witness (original coordinates) is copied into
/// `witness` when it is non-null and holds `witness_len ≥ dim` values.
///
/// # Safety
/// `certs` must point to `count` live handles; `out` must be valid; `witness` null or
/// writable for `witness_len` values.
#[no_mangle]
pub unsafe extern "C" fn kr_combine(
    certs: *const *const KrCertificate,
    count: usize,
    samples: usize,
    seed: u64,
    out: *mut *mut KrCombined,
    witness: *mut f64,
    witness_len: usize,
) -> KrStatus {
    guard(|| {
        if certs.is_null() || out.is_null() {
            return null_arg("certs");
        }
        let mut list = Vec::with_capacity(count);
        for &h in std::slice::from_raw_parts(certs, count) {
            match h.as_ref() {
                Some(c) => list.push(c.0.clone()),
                None => return null_arg("certs[i]"),
            }
        }
        match combine(&list, samples, seed) {
            Ok(c) => {
                *out = Box::into_raw(Box::new(KrCombined(c)));
                KrStatus::Ok
            }
            Err(Error::NestingViolated { witness: w }) => {
                if !witness.is_null() && witness_len >= w.len() {
                    std::slice::from_raw_parts_mut(witness, w.len()).copy_from_slice(&w);
                }
                fail(Error::NestingViolated { witness: w })
            }
            Err(e) => fail(e),
        }
    })
}

/// Whether `x` (original coordinates) lies in the union of the outer sets.
///
/// # Safety
/// `combined` must be a live handle and `x` point to `n` readable values.
#[no_mangle]
pub unsafe extern "C" fn kr_combined_contains(combined: *const KrCombined, x: *const f64, n: usize) -> bool {
    let Some(c) = combined.as_ref() else { return false };
    let Some(first) = c.0.certificates.first() else { return false };
    if x.is_null() || n != first.dim() {
        return false;
    }
    c.0.in_outer(std::slice::from_raw_parts(x, n))
}

/// # Safety
/// `combined` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn kr_combined_free(combined: *mut KrCombined) {
    if !combined.is_null() {
        drop(Box::from_raw(combined));
    }
}

/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn kr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
