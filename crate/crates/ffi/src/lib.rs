//! C interface. Systems are opaque handles; analyses return JSON strings
//! that the caller releases with `rk_string_free`. Every function returns an
//! `RkStatus`; on failure `rk_last_error_message` describes the cause.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use resilience_kit::quantitative::{bounds_report, BoundsRequest, Hypotheses};
use resilience_kit::reachability::reach_tube;
use resilience_kit::resilience::{check_resilience, compute_z_set, split_system, verdict_from_zset, LinearSystem};
use resilience_kit::scenario::{load_scenario, Scenario};
use resilience_kit::{Error, Matrix, Settings, Vector};

/// Result codes shared by every entry point.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numerical = 3,
    /// A hypothesis of the analysis does not hold (for example Z is empty).
    Hypothesis = 4,
    Capacity = 5,
    Panic = 6,
}

/// Opaque linear system handle.
pub struct RkSystem {
    inner: LinearSystem,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> RkStatus {
    match e {
        Error::Numerical { .. } => RkStatus::Numerical,
        Error::Capacity(_) => RkStatus::Capacity,
        Error::Precondition(_) | Error::Rank { .. } => RkStatus::Hypothesis,
        _ => RkStatus::InvalidArgument,
    }
}

enum Failure {
    Status(RkStatus, String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn null(what: &str) -> Failure {
    Failure::Status(RkStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> RkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            RkStatus::Ok
        }
        Ok(Err(Failure::Status(s, msg))) => {
            set_error(&msg);
            s
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic");
            RkStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Status(RkStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn system<'a>(p: *const RkSystem) -> Result<&'a LinearSystem, Failure> {
    p.as_ref().map(|s| &s.inner).ok_or_else(|| null("system"))
}

unsafe fn emit_handle(out: *mut *mut RkSystem, sys: LinearSystem) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(RkSystem { inner: sys }));
    Ok(())
}

unsafe fn emit_json(out: *mut *mut c_char, doc: serde_json::Result<String>) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out_json"));
    }
    let text = doc.map_err(Error::from)?;
    *out = CString::new(text).expect("JSON has no NUL bytes").into_raw();
    Ok(())
}

/// Builds a system from row-major `A` (`n × n`) and `B_bar` (`n × k`).
///
/// # Safety
/// `a` must point to `n*n` doubles, `b_bar` to `n*k` doubles, `out` to a
/// writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn rk_system_new(
    n: usize,
    k: usize,
    a: *const f64,
    b_bar: *const f64,
    out: *mut *mut RkSystem,
) -> RkStatus {
    guard(|| {
        if n == 0 || k == 0 {
            return Err(Failure::Status(RkStatus::InvalidArgument, "n and k must be positive".into()));
        }
        let a = Matrix::from_row_slice(n, n, slice(a, n * n, "a")?);
        let b = Matrix::from_row_slice(n, k, slice(b_bar, n * k, "b_bar")?);
        emit_handle(out, LinearSystem::new(a, b)?)
    })
}

/// Loads a built-in scenario by name.
///
/// # Safety
/// `name` must be a NUL-terminated string, `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn rk_system_from_scenario(name: *const c_char, out: *mut *mut RkSystem) -> RkStatus {
    guard(|| {
        let sc = load_scenario(c_str(name, "name")?)?;
        emit_handle(out, sc.system)
    })
}

/// Parses a system description in the scenario JSON format.
///
/// # Safety
/// `json` must be a NUL-terminated string, `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn rk_system_from_json(json: *const c_char, out: *mut *mut RkSystem) -> RkStatus {
    guard(|| {
        let sc = Scenario::from_json(c_str(json, "json")?)?;
        emit_handle(out, sc.system)
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `sys` must come from one of the constructors and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn rk_system_free(sys: *mut RkSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// Writes the state and actuator counts.
///
/// # Safety
/// `sys` must be a live handle; `n` and `k` writable.
#[no_mangle]
pub unsafe extern "C" fn rk_system_dims(sys: *const RkSystem, n: *mut usize, k: *mut usize) -> RkStatus {
    guard(|| {
        let s = system(sys)?;
        if n.is_null() || k.is_null() {
            return Err(null("n or k"));
        }
        *n = s.n();
        *k = s.num_actuators();
        Ok(())
    })
}

/// Resilience verdict for the given lost actuators (0-based indices) as JSON.
///
/// # Safety
/// `lost` must point to `lost_len` indices; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rk_check(
    sys: *const RkSystem,
    lost: *const usize,
    lost_len: usize,
    out_json: *mut *mut c_char,
) -> RkStatus {
    guard(|| {
        let s = system(sys)?;
        let split = split_system(s, slice(lost, lost_len, "lost")?)?;
        let verdict = check_resilience(s, &split, &Settings::default())?;
        emit_json(out_json, serde_json::to_string(&verdict))
    })
}

/// Reach tube from `x0` (length `n`) over `horizon` seconds in `steps` steps, as JSON.
///
/// # Safety
/// Pointers as in `rk_check`; `x0` must point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn rk_reach(
    sys: *const RkSystem,
    lost: *const usize,
    lost_len: usize,
    x0: *const f64,
    horizon: f64,
    steps: usize,
    out_json: *mut *mut c_char,
) -> RkStatus {
    guard(|| {
        let s = system(sys)?;
        let settings = Settings::default();
        let split = split_system(s, slice(lost, lost_len, "lost")?)?;
        let x0 = Vector::from_column_slice(slice(x0, s.n(), "x0")?);
        let z = compute_z_set(&split, &settings)?;
        if z.is_empty() {
            return Err(Failure::Status(RkStatus::Hypothesis, "Z is empty: no tube exists".into()));
        }
        let tube = reach_tube(s.a(), &z, &x0, horizon, steps, &settings)?;
        emit_json(out_json, serde_json::to_string(&tube))
    })
}

/// Reach-time and quantitative-resilience bounds at `x0`, as JSON.
///
/// # Safety
/// Pointers as in `rk_reach`.
#[no_mangle]
pub unsafe extern "C" fn rk_bounds(
    sys: *const RkSystem,
    lost: *const usize,
    lost_len: usize,
    x0: *const f64,
    samples: usize,
    seed: u64,
    out_json: *mut *mut c_char,
) -> RkStatus {
    guard(|| {
        let s = system(sys)?;
        let settings = Settings::default();
        let split = split_system(s, slice(lost, lost_len, "lost")?)?;
        let x0 = Vector::from_column_slice(slice(x0, s.n(), "x0")?);
        let z = compute_z_set(&split, &settings)?;
        let verdict = verdict_from_zset(s, &split, &z, &settings)?;
        let req = BoundsRequest {
            system: s,
            z: z.inner.as_ref(),
            hypotheses: Hypotheses {
                resiliently_stabilizable: verdict.resiliently_stabilizable,
            },
            x0: &x0,
            samples,
            seed,
            ellipsoid_fit: true,
            identity: true,
        };
        emit_json(out_json, serde_json::to_string(&bounds_report(&req, &settings)?))
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn rk_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message for the most recent failure on this thread; empty after a
/// success. Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn rk_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, NUL-terminated and static.
#[no_mangle]
pub extern "C" fn rk_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    #[test]
    fn null_handle_is_reported() {
        let mut out = ptr::null_mut();
        let st = unsafe { rk_check(ptr::null(), ptr::null(), 0, &mut out) };
        assert_eq!(st, RkStatus::NullPointer);
        assert!(out.is_null());
        let msg = unsafe { CStr::from_ptr(rk_last_error_message()) };
        assert!(msg.to_str().unwrap().contains("system"));
    }

    #[test]
    fn status_mapping() {
        assert_eq!(status_of(&Error::Capacity("x".into())), RkStatus::Capacity);
        assert_eq!(status_of(&Error::Precondition("x".into())), RkStatus::Hypothesis);
        assert_eq!(status_of(&Error::Argument("x".into())), RkStatus::InvalidArgument);
    }
}
