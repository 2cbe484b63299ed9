//! C ABI for the Airy flow solver.
//!
//! Every function returns an [`AfStatus`]; on failure the message is kept in
//! thread-local storage and can be copied out with
//! [`af_last_error_message`]. Solvers are opaque [`AfSolver`] handles created
//! by [`af_solver_new`] and released with [`af_solver_free`]. Panics never
//! cross the boundary; they are reported as `AF_STATUS_INTERNAL`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use airy_flow::diagnostics;
use airy_flow::geometry::{self, Shape, ThetaLState};
use airy_flow::harness::{self, HarnessError, ParsedConfig};
use airy_flow::{FilterMode, Scheme, SchemeConfig, SchemeError, Solver};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ParseError = 3,
    BlowUp = 4,
    BufferTooSmall = 5,
    Io = 6,
    Internal = 7,
}

/// Opaque solver handle.
pub struct AfSolver {
    solver: Solver,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn fail(status: AfStatus, msg: impl Into<String>) -> AfStatus {
    set_error(msg);
    status
}

fn scheme_status(e: &SchemeError) -> AfStatus {
    match e {
        SchemeError::BlowUp { .. } => AfStatus::BlowUp,
        _ => AfStatus::InvalidArgument,
    }
}

fn harness_status(e: &HarnessError) -> AfStatus {
    match e {
        HarnessError::ParseError { .. } => AfStatus::ParseError,
        HarnessError::Io { .. } => AfStatus::Io,
        HarnessError::Scheme(s) => scheme_status(s),
        _ => AfStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> AfStatus) -> AfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(AfStatus::Internal, "internal panic"),
    }
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, AfStatus> {
    if p.is_null() {
        return Err(fail(AfStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(AfStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn solver_ref<'a>(h: *const AfSolver) -> Result<&'a AfSolver, AfStatus> {
    h.as_ref()
        .ok_or_else(|| fail(AfStatus::NullPointer, "solver handle is null"))
}

fn current_state(h: &AfSolver) -> Result<ThetaLState, AfStatus> {
    h.solver.state().map_err(|e| fail(scheme_status(&e), e.to_string()))
}

macro_rules! try_status {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(status) => return status,
        }
    };
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length in bytes, excluding
/// the terminator.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn af_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let k = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), k);
            *buf.add(k) = 0;
        }
        msg.len()
    })
}

/// Creates a solver for a catalog shape.
///
/// `shape` is one of `circle` (r), `ellipse` (a, b), `perturbed_circle`
/// (r0, delta0, m), `e`, `e1`, `e2`, `e3`, `pc3`, `cardioid`; `params` holds
/// `n_params` values. `scheme` is `adb`, `cn` or `cnadb`; `filter` is
/// `none`, `dpr`, `krasny` or `both` (null means `none`).
///
/// # Safety
/// String arguments must be null or NUL-terminated; `params` must be valid for
/// `n_params` reads; `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn af_solver_new(
    shape: *const c_char,
    params: *const f64,
    n_params: usize,
    n: usize,
    dt: f64,
    scheme: *const c_char,
    filter: *const c_char,
    out: *mut *mut AfSolver,
) -> AfStatus {
    guard(|| {
        if out.is_null() {
            return fail(AfStatus::NullPointer, "out is null");
        }
        *out = std::ptr::null_mut();
        let shape_name = try_status!(c_str(shape, "shape"));
        let params: &[f64] = if n_params == 0 {
            &[]
        } else if params.is_null() {
            return fail(AfStatus::NullPointer, "params is null");
        } else {
            std::slice::from_raw_parts(params, n_params)
        };
        let scheme_name = try_status!(c_str(scheme, "scheme"));
        let Some(scheme) = Scheme::parse(scheme_name) else {
            return fail(AfStatus::InvalidArgument, format!("unknown scheme `{scheme_name}`"));
        };
        let filter = if filter.is_null() {
            FilterMode::None
        } else {
            let name = try_status!(c_str(filter, "filter"));
            match FilterMode::parse(name) {
                Some(f) => f,
                None => return fail(AfStatus::InvalidArgument, format!("unknown filter `{name}`")),
            }
        };
        let built = Shape::from_name(shape_name, params)
            .and_then(|s| ThetaLState::from_shape(&s, n))
            .map_err(|e| e.to_string())
            .and_then(|initial| {
                Solver::new(&initial, SchemeConfig::new(scheme, dt, filter, n)).map_err(|e| e.to_string())
            });
        match built {
            Ok(solver) => {
                *out = Box::into_raw(Box::new(AfSolver { solver }));
                AfStatus::Ok
            }
            Err(msg) => fail(AfStatus::InvalidArgument, msg),
        }
    })
}

/// Releases a solver. Null is ignored.
///
/// # Safety
/// `h` must come from [`af_solver_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn af_solver_free(h: *mut AfSolver) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Advances by `steps` time steps. After `AF_STATUS_BLOW_UP` the solver is
/// left at the last good state.
///
/// # Safety
/// `h` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn af_solver_advance(h: *mut AfSolver, steps: usize) -> AfStatus {
    guard(|| {
        let Some(h) = h.as_mut() else {
            return fail(AfStatus::NullPointer, "solver handle is null");
        };
        match h.solver.advance(steps) {
            Ok(()) => AfStatus::Ok,
            Err(e) => fail(scheme_status(&e), e.to_string()),
        }
    })
}

/// Current time and number of nodes.
///
/// # Safety
/// `h` must be a live handle; `time` and `n` must be null or valid for one
/// write.
#[no_mangle]
pub unsafe extern "C" fn af_solver_info(h: *const AfSolver, time: *mut f64, n: *mut usize) -> AfStatus {
    guard(|| {
        let h = try_status!(solver_ref(h));
        if !time.is_null() {
            *time = h.solver.time();
        }
        if !n.is_null() {
            *n = h.solver.config().n;
        }
        AfStatus::Ok
    })
}

/// Writes the curvature at the `n` nodes into `k`.
///
/// # Safety
/// `h` must be a live handle; `k` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn af_solver_curvature(h: *const AfSolver, k: *mut f64, len: usize) -> AfStatus {
    guard(|| {
        let h = try_status!(solver_ref(h));
        if k.is_null() {
            return fail(AfStatus::NullPointer, "k is null");
        }
        let n = h.solver.config().n;
        if len < n {
            return fail(AfStatus::BufferTooSmall, format!("need {n} values, got {len}"));
        }
        let state = try_status!(current_state(h));
        let curv = geometry::curvature(&state);
        std::ptr::copy_nonoverlapping(curv.values().as_ptr(), k, n);
        AfStatus::Ok
    })
}

/// Writes the node coordinates into `x` and `y`.
///
/// # Safety
/// `h` must be a live handle; `x` and `y` must each be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn af_solver_points(h: *const AfSolver, x: *mut f64, y: *mut f64, len: usize) -> AfStatus {
    guard(|| {
        let h = try_status!(solver_ref(h));
        if x.is_null() || y.is_null() {
            return fail(AfStatus::NullPointer, "x or y is null");
        }
        let n = h.solver.config().n;
        if len < n {
            return fail(AfStatus::BufferTooSmall, format!("need {n} values, got {len}"));
        }
        let state = try_status!(current_state(h));
        let pts = match geometry::reconstruct_curve_with_tolerance(&state, f64::INFINITY) {
            Ok(p) => p,
            Err(e) => return fail(AfStatus::InvalidArgument, e.to_string()),
        };
        std::ptr::copy_nonoverlapping(pts.x.as_ptr(), x, n);
        std::ptr::copy_nonoverlapping(pts.y.as_ptr(), y, n);
        AfStatus::Ok
    })
}

/// Conserved quantities `M1 = ∮k ds`, `M2 = ∮k² ds`, `M3 = ∮(k_s²/2 − k⁴/8) ds`
/// of the current state.
///
/// # Safety
/// `h` must be a live handle; `out` must be valid for 3 writes.
#[no_mangle]
pub unsafe extern "C" fn af_solver_conserved(h: *const AfSolver, out: *mut f64) -> AfStatus {
    guard(|| {
        let h = try_status!(solver_ref(h));
        if out.is_null() {
            return fail(AfStatus::NullPointer, "out is null");
        }
        let state = try_status!(current_state(h));
        let c = diagnostics::conserved_quantities(&state);
        *out = c.m1;
        *out.add(1) = c.m2;
        *out.add(2) = c.m3;
        AfStatus::Ok
    })
}

/// Runs a TOML experiment or convergence config and writes its outputs.
/// A non-null `out_dir` overrides the configured output directory.
///
/// # Safety
/// `config` must be NUL-terminated; `out_dir` must be null or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn af_run_config(config: *const c_char, out_dir: *const c_char) -> AfStatus {
    guard(|| {
        let text = try_status!(c_str(config, "config"));
        let dir = if out_dir.is_null() {
            None
        } else {
            Some(PathBuf::from(try_status!(c_str(out_dir, "out_dir"))))
        };
        let result = harness::parse_config(text).and_then(|parsed| match parsed {
            ParsedConfig::Run(mut cfg) => {
                if let Some(d) = dir {
                    cfg.output_dir = d;
                }
                harness::run_experiment(&cfg).map(|_| ())
            }
            ParsedConfig::Convergence(mut study) => {
                if let Some(d) = dir {
                    study.base.output_dir = d;
                }
                harness::run_convergence_study(&study, 0).map(|_| ())
            }
        });
        match result {
            Ok(()) => AfStatus::Ok,
            Err(e) => fail(harness_status(&e), e.to_string()),
        }
    })
}
