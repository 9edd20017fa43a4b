//! C ABI over the `cbre` toolkit.
//!
//! Models live behind the opaque [`CbreModel`] handle. Every fallible
//! function returns a [`CbreStatus`]; on failure the message is available
//! from [`cbre_last_error`] on the same thread. Strings handed out by the
//! library are released with [`cbre_string_free`].
//!
//! Panics never cross the boundary: they are caught and reported as
//! [`CbreStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cbre::cli::config::{parse_config, parse_model};
use cbre::cli::reports;
use cbre::diffusion_scale::{hitting_prob, DiffusionModel};
use cbre::logistic_analytics::{laplace_ta_logistic, mean_t0, LogisticModel};
use cbre::mechanisms::ModelSpec;
use cbre::CbreError;

/// Result codes. `Ok` is 0; everything else is a failure.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CbreStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// A JSON document did not parse or failed validation.
    Malformed = 3,
    /// An argument lies outside the domain of the quantity.
    Domain = 4,
    /// The model is outside the regime the quantity needs.
    Regime = 5,
    /// A numerical routine failed to converge or diverged.
    Numerical = 6,
    /// A Rust panic was caught.
    Panic = 7,
}

/// Opaque model handle.
pub struct CbreModel {
    spec: ModelSpec,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &CbreError) -> CbreStatus {
    match e {
        CbreError::InvalidModel(_) | CbreError::Json(_) | CbreError::Io(_) => CbreStatus::Malformed,
        CbreError::Domain(_) => CbreStatus::Domain,
        CbreError::RegimeMismatch(_) => CbreStatus::Regime,
        _ => CbreStatus::Numerical,
    }
}

/// Run `f`, recording any error or panic.
fn guard(f: impl FnOnce() -> Result<(), (CbreStatus, String)>) -> CbreStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CbreStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p.downcast_ref::<&str>().map(|s| s.to_string()).or_else(|| p.downcast_ref::<String>().cloned()).unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            CbreStatus::Panic
        }
    }
}

fn lib<T>(r: cbre::Result<T>) -> Result<T, (CbreStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

/// # Safety
/// `p` is null or a valid nul-terminated string.
unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, (CbreStatus, String)> {
    if p.is_null() {
        return Err((CbreStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|e| (CbreStatus::InvalidUtf8, format!("{what}: {e}")))
}

/// # Safety
/// `m` is null or a handle from [`cbre_model_from_json`].
unsafe fn model<'a>(m: *const CbreModel) -> Result<&'a ModelSpec, (CbreStatus, String)> {
    m.as_ref().map(|m| &m.spec).ok_or((CbreStatus::NullPointer, "model handle is null".into()))
}

fn out_ptr<T>(p: *mut T) -> Result<(), (CbreStatus, String)> {
    if p.is_null() {
        Err((CbreStatus::NullPointer, "output pointer is null".into()))
    } else {
        Ok(())
    }
}

fn owned(s: String) -> Result<*mut c_char, (CbreStatus, String)> {
    CString::new(s).map(CString::into_raw).map_err(|e| (CbreStatus::Numerical, e.to_string()))
}

/// Last error message on this thread, or null. Valid until the next call
/// into the library on the same thread; do not free.
#[no_mangle]
pub extern "C" fn cbre_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn cbre_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parse a model document and return a handle in `*out`.
///
/// # Safety
/// `json` is a nul-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn cbre_model_from_json(json: *const c_char, out: *mut *mut CbreModel) -> CbreStatus {
    guard(|| {
        out_ptr(out)?;
        *out = ptr::null_mut();
        let spec = parse_model(text(json, "json")?, "<model>").map_err(|e| (CbreStatus::Malformed, e.to_string()))?;
        *out = Box::into_raw(Box::new(CbreModel { spec }));
        Ok(())
    })
}

/// Release a handle. Null is ignored.
///
/// # Safety
/// `m` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cbre_model_free(m: *mut CbreModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// The model serialised back to JSON.
///
/// # Safety
/// `m` is a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn cbre_model_to_json(m: *const CbreModel, out: *mut *mut c_char) -> CbreStatus {
    guard(|| {
        out_ptr(out)?;
        *out = owned(lib(serde_json::to_string(model(m)?).map_err(CbreError::from))?)?;
        Ok(())
    })
}

/// Classification report (JSON) in `*out`; free with [`cbre_string_free`].
///
/// # Safety
/// `m` is a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn cbre_classify_json(m: *const CbreModel, out: *mut *mut c_char) -> CbreStatus {
    guard(|| {
        out_ptr(out)?;
        let rep = reports::classify(model(m)?);
        *out = owned(lib(serde_json::to_string(&rep).map_err(CbreError::from))?)?;
        Ok(())
    })
}

/// `P_x(T_0 < T_y)` for a jump-free model with `γ > 0`.
///
/// # Safety
/// `m` is a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn cbre_hitting_prob(m: *const CbreModel, x: f64, y: f64, out: *mut f64) -> CbreStatus {
    guard(|| {
        out_ptr(out)?;
        let d = lib(DiffusionModel::from_model(model(m)?))?;
        *out = lib(hitting_prob(&d, x, y))?;
        Ok(())
    })
}

/// `E_x[e^{-λ T_a}]` for a logistic model.
///
/// # Safety
/// `m` is a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn cbre_laplace_hitting_time(m: *const CbreModel, x: f64, a: f64, lambda: f64, out: *mut f64) -> CbreStatus {
    guard(|| {
        out_ptr(out)?;
        let l = lib(LogisticModel::from_model(model(m)?))?;
        *out = lib(laplace_ta_logistic(&l, x, a, lambda))?;
        Ok(())
    })
}

/// `E_x[T_0]` for a logistic model.
///
/// # Safety
/// `m` is a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn cbre_mean_extinction_time(m: *const CbreModel, x: f64, out: *mut f64) -> CbreStatus {
    guard(|| {
        out_ptr(out)?;
        let l = lib(LogisticModel::from_model(model(m)?))?;
        *out = lib(mean_t0(&l, x))?;
        Ok(())
    })
}

/// Monte Carlo summary (JSON) in `*out`. `config_json` is an experiment
/// document whose `simulation` and `analytics` sections are used; its
/// `model`, if any, is replaced by the handle's.
///
/// # Safety
/// `m` is a live handle, `config_json` a nul-terminated string and `out`
/// a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn cbre_simulate_json(m: *const CbreModel, config_json: *const c_char, out: *mut *mut c_char) -> CbreStatus {
    guard(|| {
        out_ptr(out)?;
        let spec = model(m)?;
        let cfg = parse_config(text(config_json, "config_json")?, "<config>").map_err(|e| (CbreStatus::Malformed, e.to_string()))?;
        let summary = lib(reports::simulate_summary(spec, &cfg.simulation, &cfg.analytics))?;
        *out = owned(lib(serde_json::to_string(&summary).map_err(CbreError::from))?)?;
        Ok(())
    })
}

/// Release a string returned by the library. Null is ignored.
///
/// # Safety
/// `s` is null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cbre_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
