//! C interface to `latticeflow`.
//!
//! Functions and semigroups cross the boundary as opaque handles owned by
//! the caller and released with the matching `*_free`. Every entry point
//! returns an [`LfStatus`]; on failure the message is available from
//! [`lf_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use latticeflow::cli::{self, Job};
use latticeflow::constructions::SemigroupSpec;
use latticeflow::funcspace::{self, GridSpec, RealFunction};
use latticeflow::semigroups::{self, SemigroupOperator};
use latticeflow::Error;

/// Status codes. The values 1 to 3 match the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LfStatus {
    Ok = 0,
    CheckFailed = 1,
    Parse = 2,
    Precondition = 3,
    NullArgument = 4,
    Panic = 5,
}

/// Opaque real function handle.
pub struct LfFunction(RealFunction);

/// Opaque semigroup handle.
pub struct LfSemigroup(SemigroupOperator);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).unwrap_or_default());
}

fn status_of(e: &Error) -> LfStatus {
    match cli::exit_code(e) {
        1 => LfStatus::CheckFailed,
        2 => LfStatus::Parse,
        _ => LfStatus::Precondition,
    }
}

fn guard(body: impl FnOnce() -> Result<(), LfStatus>) -> LfStatus {
    set_error("");
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => LfStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            LfStatus::Panic
        }
    }
}

fn fail(e: Error) -> LfStatus {
    set_error(e.to_string());
    status_of(&e)
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, LfStatus> {
    if p.is_null() {
        set_error(format!("{what} is null"));
        return Err(LfStatus::NullArgument);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("{what} is not UTF-8"));
        LfStatus::Parse
    })
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, LfStatus> {
    p.as_ref().ok_or_else(|| {
        set_error(format!("{what} is null"));
        LfStatus::NullArgument
    })
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, LfStatus> {
    p.as_mut().ok_or_else(|| {
        set_error(format!("{what} is null"));
        LfStatus::NullArgument
    })
}

fn grid(lo: f64, hi: f64, n: usize) -> Result<GridSpec, LfStatus> {
    GridSpec::new(lo, hi, n).map_err(fail)
}

/// Message for the last failed call on this thread; empty after success.
/// The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn lf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses an expression such as `"hat(0,1,1)"` or a JSON function document.
///
/// # Safety
/// `src` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lf_function_parse(src: *const c_char, out: *mut *mut LfFunction) -> LfStatus {
    guard(|| {
        let src = text(src, "src")?;
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let f = if src.trim_start().starts_with('{') {
            serde_json::from_str::<RealFunction>(src).map_err(|e| fail(e.into()))?
        } else {
            RealFunction::parse(src).map_err(fail)?
        };
        *out = Box::into_raw(Box::new(LfFunction(f)));
        Ok(())
    })
}

/// # Safety
/// `f` must come from this library and not be used afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn lf_function_free(f: *mut LfFunction) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// # Safety
/// `f` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lf_function_eval(f: *const LfFunction, x: f64, out: *mut f64) -> LfStatus {
    guard(|| {
        let f = deref(f, "f")?;
        *out_ptr(out, "out")? = f.0.eval(x);
        Ok(())
    })
}

/// Samples `f` on the grid `lo..=hi` with `n` points into `values`, which
/// must hold `n` doubles.
///
/// # Safety
/// `values` must point to `n` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn lf_function_sample(
    f: *const LfFunction,
    lo: f64,
    hi: f64,
    n: usize,
    values: *mut f64,
) -> LfStatus {
    guard(|| {
        let f = deref(f, "f")?;
        out_ptr(values, "values")?;
        let v = f.0.sample(&grid(lo, hi, n)?).map_err(fail)?;
        std::slice::from_raw_parts_mut(values, n).copy_from_slice(&v);
        Ok(())
    })
}

/// Order-unit norm of `f` with respect to `u` on the grid `lo..=hi`.
///
/// # Safety
/// Handles must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn lf_order_unit_norm(
    f: *const LfFunction,
    u: *const LfFunction,
    lo: f64,
    hi: f64,
    n: usize,
    out: *mut f64,
) -> LfStatus {
    guard(|| {
        let (f, u) = (deref(f, "f")?, deref(u, "u")?);
        let out = out_ptr(out, "out")?;
        *out = funcspace::order_unit_norm(&f.0, &u.0, &grid(lo, hi, n)?).map_err(fail)?;
        Ok(())
    })
}

/// Heat kernel constant `C_n` for dimension `n`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn lf_gamma_constant(n: u32, out: *mut f64) -> LfStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = semigroups::gamma_constant(n).map_err(fail)?;
        Ok(())
    })
}

/// Builds a semigroup from JSON, e.g. `{"op":"heat"}`.
///
/// # Safety
/// `spec` must be a NUL-terminated string and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn lf_semigroup_parse(spec: *const c_char, out: *mut *mut LfSemigroup) -> LfStatus {
    guard(|| {
        let spec = text(spec, "spec")?;
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let s: SemigroupSpec = serde_json::from_str(spec).map_err(|e| fail(e.into()))?;
        *out = Box::into_raw(Box::new(LfSemigroup(s.build().map_err(fail)?)));
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn lf_semigroup_free(s: *mut LfSemigroup) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Applies `T(t)` to `f`; the result is a new handle.
///
/// # Safety
/// Handles must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn lf_semigroup_apply(
    s: *const LfSemigroup,
    t: f64,
    f: *const LfFunction,
    out: *mut *mut LfFunction,
) -> LfStatus {
    guard(|| {
        let (s, f) = (deref(s, "s")?, deref(f, "f")?);
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let g = s.0.apply(t, &f.0).map_err(fail)?;
        *out = Box::into_raw(Box::new(LfFunction(g)));
        Ok(())
    })
}

/// Runs a JSON verification job and writes its reports into `out_dir`.
/// Returns `LF_STATUS_OK` for a passing verdict and `LF_STATUS_CHECK_FAILED`
/// for a failing one; both write the reports.
///
/// # Safety
/// Both arguments must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn lf_run_job(job_json: *const c_char, out_dir: *const c_char) -> LfStatus {
    guard(|| {
        let job = Job::from_json(text(job_json, "job_json")?).map_err(fail)?;
        let dir = text(out_dir, "out_dir")?;
        let outcome = cli::run_job(&job).map_err(fail)?;
        outcome.write(Path::new(dir)).map_err(fail)?;
        if outcome.pass {
            Ok(())
        } else {
            set_error("verdict: fail");
            Err(LfStatus::CheckFailed)
        }
    })
}
