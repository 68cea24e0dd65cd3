//! C ABI for opalg.
//!
//! Every fallible call returns an [`OpalgStatus`]; on failure the message is
//! kept per thread and read back with [`opalg_last_error_message`]. Models and
//! observables are passed as JSON text in the same formats the command line
//! reads. Matrices come back as row-major interleaved `re, im` doubles, so an
//! n × n result needs a buffer of 2n² doubles.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use opalg::algebra::{parse_json, AlgebraModel};
use opalg::arbitrage::{na_certificate, GainsCone, DEFAULT_FEAS_TOL};
use opalg::error::{Error, ErrorClass};
use opalg::jump::lattice::{expm_price, series_price, LatticeGrid, DEFAULT_TAIL_TOL};
use opalg::jump::{JumpModel, Payoff};
use opalg::linalg::ComplexMatrix;
use opalg::pricing::PricingSystem;
use opalg::states::DensityState;
use opalg::suite::{model_suite, SuiteConfig};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpalgStatus {
    Ok = 0,
    /// Malformed input or a violated precondition.
    Validation = 1,
    /// The computation ran but a requested property does not hold.
    CheckFailed = 2,
    /// The numerics broke down.
    Numerical = 3,
    NullPointer = 4,
    InvalidUtf8 = 5,
    /// The output buffer is too small; the required length was written.
    BufferTooSmall = 6,
    /// A Rust panic was caught at the boundary.
    Panic = 7,
}

/// Pricing method for [`opalg_jump_price`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpalgJumpMethod {
    Series = 0,
    Expm = 1,
}

/// A validated market model with its pricing state.
pub struct OpalgPricingSystem {
    inner: PricingSystem,
}

/// A lattice jump model.
pub struct OpalgJumpModel {
    inner: JumpModel,
}

struct Failure {
    status: OpalgStatus,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e.class() {
            ErrorClass::Validation => OpalgStatus::Validation,
            ErrorClass::CheckFailed => OpalgStatus::CheckFailed,
            ErrorClass::Numerical => OpalgStatus::Numerical,
        };
        Failure { status, message: format!("{}: {e}", e.code()) }
    }
}

fn failure(status: OpalgStatus, message: impl Into<String>) -> Failure {
    Failure { status, message: message.into() }
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> OpalgStatus {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| p.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "unknown panic".into());
        Err(failure(OpalgStatus::Panic, format!("panic: {msg}")))
    });
    match outcome {
        Ok(()) => {
            LAST_ERROR.with(|e| e.borrow_mut().clear());
            OpalgStatus::Ok
        }
        Err(f) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = f.message);
            f.status
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(failure(OpalgStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| failure(OpalgStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| failure(OpalgStatus::NullPointer, format!("{what} is null")))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(failure(OpalgStatus::NullPointer, format!("{what} is null")));
    }
    out.write(value);
    Ok(())
}

/// Copies `m` into `out` as interleaved doubles; `written` always receives the required length.
unsafe fn put_matrix(m: &ComplexMatrix, out: *mut f64, capacity: usize, written: *mut usize) -> Result<(), Failure> {
    let needed = 2 * m.dim() * m.dim();
    put(written, needed, "written")?;
    if capacity < needed {
        return Err(failure(OpalgStatus::BufferTooSmall, format!("buffer holds {capacity} doubles, {needed} needed")));
    }
    if out.is_null() {
        return Err(failure(OpalgStatus::NullPointer, "out is null"));
    }
    let dst = std::slice::from_raw_parts_mut(out, needed);
    for (k, z) in m.as_slice().iter().enumerate() {
        dst[2 * k] = z.re;
        dst[2 * k + 1] = z.im;
    }
    Ok(())
}

fn matrix(json: &str, dim: usize) -> Result<ComplexMatrix, Failure> {
    let m: ComplexMatrix = parse_json(json)?;
    m.ensure_dim(dim)?;
    Ok(m)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn opalg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `capacity`). Returns the full message length in bytes,
/// excluding the terminator; 0 when the last call succeeded.
///
/// # Safety
/// `buf` must be null or valid for `capacity` bytes.
#[no_mangle]
pub unsafe extern "C" fn opalg_last_error_message(buf: *mut c_char, capacity: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && capacity > 0 {
            let n = msg.len().min(capacity - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Builds a pricing system from model JSON and optional state JSON (null
/// selects the maximally mixed state).
///
/// # Safety
/// String arguments must be null or NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn opalg_pricing_system_new(
    model_json: *const c_char,
    state_json: *const c_char,
    out: *mut *mut OpalgPricingSystem,
) -> OpalgStatus {
    guard(|| {
        let model = AlgebraModel::from_json_str(text(model_json, "model_json")?)?;
        let state = if state_json.is_null() {
            DensityState::maximally_mixed(model.dim())
        } else {
            DensityState::from_json_str(text(state_json, "state_json")?)?
        };
        state.rho().ensure_dim(model.dim())?;
        let sys = Box::new(OpalgPricingSystem { inner: PricingSystem::new(model, state)? });
        put(out, Box::into_raw(sys), "out")
    })
}

/// Releases a pricing system; null is ignored.
///
/// # Safety
/// `sys` must come from [`opalg_pricing_system_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn opalg_pricing_system_free(sys: *mut OpalgPricingSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// Matrix dimension and number of filtration steps.
///
/// # Safety
/// `sys` must be a live handle; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn opalg_pricing_system_shape(
    sys: *const OpalgPricingSystem,
    dim: *mut usize,
    horizon: *mut usize,
) -> OpalgStatus {
    guard(|| {
        let s = &handle(sys, "sys")?.inner;
        put(dim, s.dim(), "dim")?;
        put(horizon, s.horizon(), "horizon")
    })
}

/// E_t(X) at filtration time `time`.
///
/// # Safety
/// `sys` must be a live handle, `x_json` NUL-terminated, `out` valid for
/// `capacity` doubles and `written` writable.
#[no_mangle]
pub unsafe extern "C" fn opalg_conditional_expectation(
    sys: *const OpalgPricingSystem,
    time: f64,
    x_json: *const c_char,
    out: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> OpalgStatus {
    guard(|| {
        let s = &handle(sys, "sys")?.inner;
        let x = matrix(text(x_json, "x_json")?, s.dim())?;
        let e = s.cond_exp(s.time_index(time)?).apply(&x)?;
        put_matrix(&e, out, capacity, written)
    })
}

/// Π_t(X) at filtration time `time`.
///
/// # Safety
/// As for [`opalg_conditional_expectation`].
#[no_mangle]
pub unsafe extern "C" fn opalg_price(
    sys: *const OpalgPricingSystem,
    time: f64,
    claim_json: *const c_char,
    out: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> OpalgStatus {
    guard(|| {
        let s = &handle(sys, "sys")?.inner;
        let x = matrix(text(claim_json, "claim_json")?, s.dim())?;
        let p = s.price(&x, s.time_index(time)?)?;
        put_matrix(&p, out, capacity, written)
    })
}

/// Scalar time-zero price of a claim.
///
/// # Safety
/// `sys` must be a live handle, `claim_json` NUL-terminated, `value` writable.
#[no_mangle]
pub unsafe extern "C" fn opalg_price0(sys: *const OpalgPricingSystem, claim_json: *const c_char, value: *mut f64) -> OpalgStatus {
    guard(|| {
        let s = &handle(sys, "sys")?.inner;
        let x = matrix(text(claim_json, "claim_json")?, s.dim())?;
        put(value, s.price0(&x)?, "value")
    })
}

/// Runs the model-level property checks. A nonpositive `tol` keeps the
/// built-in tolerances. Counts are written even when checks fail, in which
/// case the status is `CheckFailed`.
///
/// # Safety
/// `sys` must be a live handle; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn opalg_check(
    sys: *const OpalgPricingSystem,
    seed: u64,
    tol: f64,
    passed: *mut usize,
    failed: *mut usize,
) -> OpalgStatus {
    guard(|| {
        let s = &handle(sys, "sys")?.inner;
        let cfg = SuiteConfig { seed, tol: (tol > 0.0).then_some(tol) };
        let report = model_suite(&[("model".to_string(), s.clone())], cfg)?;
        put(passed, report.passed, "passed")?;
        put(failed, report.failed, "failed")?;
        if report.failed > 0 {
            let names: Vec<String> = report.failures().map(|i| i.name.clone()).collect();
            return Err(failure(OpalgStatus::CheckFailed, format!("failed: {}", names.join(", "))));
        }
        Ok(())
    })
}

/// Searches for a state ρ ⪰ δI with Tr(ρG) ≤ 0 on every gain. On success ρ
/// is written to `out`; `CheckFailed` means no such state was found. A
/// nonpositive `feas_tol` selects the default.
///
/// # Safety
/// `gains_json` must be NUL-terminated, `out` valid for `capacity` doubles
/// and `written` writable.
#[no_mangle]
pub unsafe extern "C" fn opalg_pricing_state(
    gains_json: *const c_char,
    delta: f64,
    feas_tol: f64,
    out: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> OpalgStatus {
    guard(|| {
        let cone = GainsCone::from_json_str(text(gains_json, "gains_json")?, None)?;
        let tol = if feas_tol > 0.0 { feas_tol } else { DEFAULT_FEAS_TOL };
        let cert = na_certificate(&cone, delta, tol)?;
        match &cert.state {
            Some(rho) if cert.has_pricing_state => put_matrix(rho, out, capacity, written),
            _ => Err(Error::Infeasible { max_violation: cert.violation, iterations: cert.iterations }.into()),
        }
    })
}

/// Parses a jump model from JSON.
///
/// # Safety
/// `json` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn opalg_jump_model_new(json: *const c_char, out: *mut *mut OpalgJumpModel) -> OpalgStatus {
    guard(|| {
        let m = Box::new(OpalgJumpModel { inner: JumpModel::from_json_str(text(json, "json")?)? });
        put(out, Box::into_raw(m), "out")
    })
}

/// Releases a jump model; null is ignored.
///
/// # Safety
/// `model` must come from [`opalg_jump_model_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn opalg_jump_model_free(model: *mut OpalgJumpModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Discounted price of a bounded payoff (JSON, e.g. `{"kind":"digital","strike":1}`)
/// after time `tau` from spot `s`, with a bound on the truncation error.
///
/// # Safety
/// `model` must be a live handle, `payoff_json` NUL-terminated, outputs writable.
#[no_mangle]
pub unsafe extern "C" fn opalg_jump_price(
    model: *const OpalgJumpModel,
    payoff_json: *const c_char,
    tau: f64,
    s: f64,
    method: OpalgJumpMethod,
    value: *mut f64,
    error_bound: *mut f64,
) -> OpalgStatus {
    guard(|| {
        let m = &handle(model, "model")?.inner;
        let payoff: Payoff = parse_json(text(payoff_json, "payoff_json")?)?;
        payoff.validate()?;
        let (v, bound) = match method {
            OpalgJumpMethod::Series => {
                let p = series_price(m, &payoff, tau, s, DEFAULT_TAIL_TOL)?;
                (p.value, p.tail_bound)
            }
            OpalgJumpMethod::Expm => {
                let grid = LatticeGrid::sized_for(m, tau, s)?;
                let v = expm_price(m, &payoff, tau, &grid)?;
                (v[grid.center_index()], (-m.r() * tau).exp() * payoff.sup_norm() * grid.leak_bound(m, tau))
            }
        };
        put(value, v, "value")?;
        put(error_bound, bound, "error_bound")
    })
}
