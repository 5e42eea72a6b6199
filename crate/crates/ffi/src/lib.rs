//! C ABI for the rebarflow solver.
//!
//! Conventions:
//! - every fallible function returns an `int32_t` status: `0` on success,
//!   positive codes mirroring the CLI exit codes (1 config, 2 mesh,
//!   3 solver, 4 io), `-1` for null/invalid arguments, `-2` for a caught
//!   panic;
//! - solutions are opaque handles that must be released with
//!   [`rebarflow_solution_free`];
//! - the last error message is kept in thread-local storage and can be
//!   copied out with [`rebarflow_last_error`].

use rebarflow::app::{self, Solution};
use rebarflow::constitutive::FluidLaw;
use rebarflow::error::Error;
use rebarflow::mesh::Point;
use rebarflow::micro::{solve_boundary_layer, RveProblem};
use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

pub const REBARFLOW_OK: i32 = 0;
pub const REBARFLOW_ERR_CONFIG: i32 = 1;
pub const REBARFLOW_ERR_MESH: i32 = 2;
pub const REBARFLOW_ERR_SOLVER: i32 = 3;
pub const REBARFLOW_ERR_IO: i32 = 4;
pub const REBARFLOW_ERR_ARGUMENT: i32 = -1;
pub const REBARFLOW_ERR_PANIC: i32 = -2;

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: &str) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.to_owned());
}

fn status_of(err: &Error) -> i32 {
    set_error(&err.to_string());
    err.exit_code()
}

/// Runs `f` with panic isolation, translating results into status codes.
fn guarded(f: impl FnOnce() -> i32) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(code) => code,
        Err(_) => {
            set_error("internal panic");
            REBARFLOW_ERR_PANIC
        }
    }
}

/// # Safety
/// `ptr` must be a valid NUL-terminated UTF-8 string or null.
unsafe fn cstr<'a>(ptr: *const c_char) -> Option<&'a str> {
    if ptr.is_null() {
        return None;
    }
    CStr::from_ptr(ptr).to_str().ok()
}

/// Opaque solved-scenario handle.
pub struct RebarflowSolution {
    inner: Solution,
}

/// Copies the last error message (NUL-terminated, truncated to `cap`)
/// into `buf`; returns the full message length in bytes.
///
/// # Safety
/// `buf` must point to at least `cap` writable bytes, or be null.
#[no_mangle]
pub unsafe extern "C" fn rebarflow_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Solves the scenario described by the config file at `config_path` and
/// writes its configured outputs. On success `*out` owns the solution.
///
/// # Safety
/// `config_path` must be a valid NUL-terminated string; `out` must be a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rebarflow_run(
    config_path: *const c_char,
    out: *mut *mut RebarflowSolution,
) -> i32 {
    let (Some(path), false) = (cstr(config_path), out.is_null()) else {
        set_error("null or non-UTF-8 argument");
        return REBARFLOW_ERR_ARGUMENT;
    };
    guarded(|| match app::run_scenario(Path::new(path)) {
        Ok(sol) => {
            *out = Box::into_raw(Box::new(RebarflowSolution { inner: sol }));
            REBARFLOW_OK
        }
        Err(e) => status_of(&e),
    })
}

/// Releases a solution handle. Null is a no-op.
///
/// # Safety
/// `sol` must be a pointer previously returned by [`rebarflow_run`], not
/// yet freed.
#[no_mangle]
pub unsafe extern "C" fn rebarflow_solution_free(sol: *mut RebarflowSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

/// Number of Newton iterations of the solve.
///
/// # Safety
/// `sol` must be a valid solution handle.
#[no_mangle]
pub unsafe extern "C" fn rebarflow_solution_iterations(sol: *const RebarflowSolution) -> usize {
    if sol.is_null() {
        return 0;
    }
    (*sol).inner.report.iterations.len()
}

/// Final residual norm of the solve.
///
/// # Safety
/// `sol` must be a valid solution handle.
#[no_mangle]
pub unsafe extern "C" fn rebarflow_solution_residual(sol: *const RebarflowSolution) -> f64 {
    if sol.is_null() {
        return f64::NAN;
    }
    (*sol).inner.report.final_residual
}

/// Samples velocity and pressure at `(x, y)`; fills `out[3] = {u_x, u_y,
/// p}`. Returns 0 on success, 1 when the point is outside the mesh (e.g.
/// inside an obstacle).
///
/// # Safety
/// `sol` must be a valid solution handle and `out` must point to at least
/// 3 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rebarflow_solution_sample(
    sol: *const RebarflowSolution,
    x: f64,
    y: f64,
    out: *mut f64,
) -> i32 {
    if sol.is_null() || out.is_null() {
        set_error("null argument");
        return REBARFLOW_ERR_ARGUMENT;
    }
    guarded(|| {
        let inner = &(*sol).inner;
        let locator = inner.mesh.locator();
        match inner.sample(&locator, Point::new(x, y)) {
            Some(s) => {
                *out = s.velocity[0];
                *out.add(1) = s.velocity[1];
                *out.add(2) = s.pressure;
                REBARFLOW_OK
            }
            None => 1,
        }
    })
}

/// Net volumetric flux through the outer boundary (a mass-balance check;
/// near zero at convergence).
///
/// # Safety
/// `sol` must be a valid solution handle.
#[no_mangle]
pub unsafe extern "C" fn rebarflow_solution_net_flux(sol: *const RebarflowSolution) -> f64 {
    if sol.is_null() {
        return f64::NAN;
    }
    app::net_boundary_flux(&(*sol).inner)
}

/// Newtonian unit-cell permeability for an obstacle of radius `xi`
/// (0 < xi < 0.5) at viscosity `mu`, on a cell mesh of resolution `h`.
/// Fills `out_k[4]` row-major.
///
/// # Safety
/// `out_k` must point to at least 4 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rebarflow_rve_permeability(
    xi: f64,
    h: f64,
    mu: f64,
    out_k: *mut f64,
) -> i32 {
    if out_k.is_null() {
        set_error("null argument");
        return REBARFLOW_ERR_ARGUMENT;
    }
    guarded(|| {
        let run = || -> rebarflow::Result<[[f64; 2]; 2]> {
            RveProblem::new(xi, h, FluidLaw::Newtonian { mu })?.permeability()
        };
        match run() {
            Ok(k) => {
                *out_k = k[0][0];
                *out_k.add(1) = k[0][1];
                *out_k.add(2) = k[1][0];
                *out_k.add(3) = k[1][1];
                REBARFLOW_OK
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Beavers-Joseph-Saffman slip coefficient from the boundary-layer cell
/// problem for a Newtonian fluid of viscosity `mu`.
///
/// # Safety
/// `out_beta` must point to a writable double.
#[no_mangle]
pub unsafe extern "C" fn rebarflow_boundary_layer_beta(
    xi: f64,
    free_cells: usize,
    h: f64,
    mu: f64,
    out_beta: *mut f64,
) -> i32 {
    if out_beta.is_null() {
        set_error("null argument");
        return REBARFLOW_ERR_ARGUMENT;
    }
    guarded(|| match solve_boundary_layer(xi, free_cells, h) {
        Ok(bl) => {
            *out_beta = bl.beta(mu);
            REBARFLOW_OK
        }
        Err(e) => status_of(&e),
    })
}
