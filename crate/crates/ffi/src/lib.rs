//! C interface to the netembed verifiers.
//!
//! Every call returns a [`NetembedStatus`]; on failure the message is kept in
//! a thread-local slot readable through [`netembed_last_error`]. Handles are
//! opaque and must be released with their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use netembed::harness::{run, Context, RunOptions, Scenario, Subcommand, VerificationReport};
use netembed::manifold::{distance, ChartPoint};
use netembed::netlattice::{gamma, Lattice};
use netembed::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NetembedStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Domain = 4,
    Numeric = 5,
    Coverage = 6,
    Io = 7,
    Panic = 8,
}

/// A loaded scenario with its net, embedding and glued map built.
pub struct NetembedScenario {
    scenario: Scenario,
    context: Context,
}

/// A finished verification run.
pub struct NetembedReport {
    report: VerificationReport,
    json: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> NetembedStatus {
    match err {
        Error::Config(_) | Error::Parse { .. } => NetembedStatus::Config,
        Error::Domain(_) | Error::Precondition(_) => NetembedStatus::Domain,
        Error::Coverage { .. } => NetembedStatus::Coverage,
        Error::Io(_) => NetembedStatus::Io,
        Error::Evaluation { source, .. } => status_of(source),
        _ => NetembedStatus::Numeric,
    }
}

fn fail(status: NetembedStatus, msg: impl Into<String>) -> NetembedStatus {
    set_error(msg.into());
    status
}

fn guard(f: impl FnOnce() -> Result<(), NetembedStatus>) -> NetembedStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NetembedStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(NetembedStatus::Panic, format!("panic: {msg}"))
        }
    }
}

fn lift<T>(r: netembed::Result<T>) -> Result<T, NetembedStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, NetembedStatus> {
    if p.is_null() {
        return Err(fail(NetembedStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(NetembedStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], NetembedStatus> {
    if p.is_null() {
        return Err(fail(NetembedStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn handle<'a, T>(p: *const T) -> Result<&'a T, NetembedStatus> {
    p.as_ref().ok_or_else(|| fail(NetembedStatus::NullPointer, "handle is null"))
}

fn check_dim(len: usize, dim: usize) -> Result<(), NetembedStatus> {
    if len != dim {
        return Err(fail(NetembedStatus::InvalidArgument, format!("expected {dim} coordinates, got {len}")));
    }
    Ok(())
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn netembed_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Loads a scenario file and builds its glued map.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn netembed_scenario_load(path: *const c_char, out: *mut *mut NetembedScenario) -> NetembedStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(NetembedStatus::NullPointer, "out is null"));
        }
        let path = str_arg(path, "path")?;
        let scenario = lift(Scenario::load(Path::new(path)))?;
        let context = lift(scenario.build())?;
        *out = Box::into_raw(Box::new(NetembedScenario { scenario, context }));
        Ok(())
    })
}

/// # Safety
/// `h` must come from [`netembed_scenario_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn netembed_scenario_free(h: *mut NetembedScenario) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Dimension of the scenario, 0 for a null handle.
///
/// # Safety
/// `h` must be null or a live scenario handle.
#[no_mangle]
pub unsafe extern "C" fn netembed_scenario_dim(h: *const NetembedScenario) -> usize {
    h.as_ref().map_or(0, |s| s.scenario.dim)
}

/// Writes `(ε, δ, R₀, R₁)` of the scenario into `out[0..4]`.
///
/// # Safety
/// `h` must be a live handle and `out` must hold 4 doubles.
#[no_mangle]
pub unsafe extern "C" fn netembed_scenario_constants(h: *const NetembedScenario, out: *mut f64) -> NetembedStatus {
    guard(|| {
        let s = handle(h)?;
        if out.is_null() {
            return Err(fail(NetembedStatus::NullPointer, "out is null"));
        }
        let c = s.context.glued.constants();
        let values = [s.context.glued.epsilon(), s.scenario.net.delta, c.r0, c.r1];
        ptr::copy_nonoverlapping(values.as_ptr(), out, 4);
        Ok(())
    })
}

/// Evaluates the glued map at `x[0..len]`, writing `len` chart coordinates.
///
/// # Safety
/// `h` must be a live handle; `x` and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn netembed_phi(h: *const NetembedScenario, x: *const f64, len: usize, out: *mut f64) -> NetembedStatus {
    guard(|| {
        let s = handle(h)?;
        let x = slice_arg(x, len, "x")?;
        check_dim(len, s.scenario.dim)?;
        if out.is_null() {
            return Err(fail(NetembedStatus::NullPointer, "out is null"));
        }
        let y = lift(s.context.glued.phi(x))?;
        ptr::copy_nonoverlapping(y.as_slice().as_ptr(), out, len);
        Ok(())
    })
}

/// Riemannian distance between two chart points of the scenario's manifold.
///
/// # Safety
/// `h` must be a live handle; `x` and `y` must hold `len` doubles and `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn netembed_distance(
    h: *const NetembedScenario,
    x: *const f64,
    y: *const f64,
    len: usize,
    out: *mut f64,
) -> NetembedStatus {
    guard(|| {
        let s = handle(h)?;
        let x = slice_arg(x, len, "x")?;
        let y = slice_arg(y, len, "y")?;
        check_dim(len, s.scenario.dim)?;
        if out.is_null() {
            return Err(fail(NetembedStatus::NullPointer, "out is null"));
        }
        let p = lift(ChartPoint::from_slice(x))?;
        let q = lift(ChartPoint::from_slice(y))?;
        *out = lift(distance(s.context.net.metric(), &p, &q))?;
        Ok(())
    })
}

/// Nearest point of the lattice `εℤⁿ`, least-norm on ties, as integer indices.
///
/// # Safety
/// `x` must hold `len` doubles and `out` `len` integers.
#[no_mangle]
pub unsafe extern "C" fn netembed_gamma(epsilon: f64, x: *const f64, len: usize, out: *mut i64) -> NetembedStatus {
    guard(|| {
        let x = slice_arg(x, len, "x")?;
        if out.is_null() {
            return Err(fail(NetembedStatus::NullPointer, "out is null"));
        }
        let lattice = lift(Lattice::new(epsilon))?;
        let k = gamma(x, &lattice);
        ptr::copy_nonoverlapping(k.as_ptr(), out, len);
        Ok(())
    })
}

/// Runs a verification subcommand (`audit`, `phi-verify`, `net-check`,
/// `degree`, `directions` or `all`). `seed` overrides the scenario seed when
/// `use_seed` is true. A report is produced even when checks fail.
///
/// # Safety
/// `h` must be a live handle, `subcommand` a NUL-terminated string and `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn netembed_run(
    h: *const NetembedScenario,
    subcommand: *const c_char,
    use_seed: bool,
    seed: u64,
    out: *mut *mut NetembedReport,
) -> NetembedStatus {
    guard(|| {
        let s = handle(h)?;
        if out.is_null() {
            return Err(fail(NetembedStatus::NullPointer, "out is null"));
        }
        let sub: Subcommand = lift(str_arg(subcommand, "subcommand")?.parse())?;
        let opts = RunOptions { seed: use_seed.then_some(seed), timing: false };
        let report = lift(run(sub, &s.scenario, &opts))?;
        let json = lift(report.to_json())?;
        let json = CString::new(json).map_err(|_| fail(NetembedStatus::Numeric, "report contains NUL"))?;
        *out = Box::into_raw(Box::new(NetembedReport { report, json }));
        Ok(())
    })
}

/// True when every check in the report passed.
///
/// # Safety
/// `r` must be null or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn netembed_report_passed(r: *const NetembedReport) -> bool {
    r.as_ref().is_some_and(|r| r.report.passed())
}

/// # Safety
/// `r` must be null or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn netembed_report_hypothesis_violated(r: *const NetembedReport) -> bool {
    r.as_ref().is_some_and(|r| r.report.hypothesis_violated)
}

/// # Safety
/// `r` must be null or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn netembed_report_check_count(r: *const NetembedReport) -> usize {
    r.as_ref().map_or(0, |r| r.report.checks.len())
}

/// JSON text of the report, owned by the handle.
///
/// # Safety
/// `r` must be null or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn netembed_report_json(r: *const NetembedReport) -> *const c_char {
    r.as_ref().map_or(ptr::null(), |r| r.json.as_ptr())
}

/// # Safety
/// `r` must come from [`netembed_run`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn netembed_report_free(r: *mut NetembedReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_rounds_toward_zero_on_ties() {
        let x = [0.5, -0.5, 1.4, -2.6];
        let mut out = [9i64; 4];
        let s = unsafe { netembed_gamma(1.0, x.as_ptr(), 4, out.as_mut_ptr()) };
        assert_eq!(s, NetembedStatus::Ok);
        assert_eq!(out, [0, 0, 1, -3]);
    }

    #[test]
    fn null_arguments_set_message() {
        let s = unsafe { netembed_gamma(1.0, ptr::null(), 2, ptr::null_mut()) };
        assert_eq!(s, NetembedStatus::NullPointer);
        let msg = unsafe { CStr::from_ptr(netembed_last_error()) };
        assert!(msg.to_str().unwrap().contains("null"));
    }
}
