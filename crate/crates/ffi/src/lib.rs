//! C ABI over `smpm_schur`.
//!
//! Every entry point returns an [`SmpmStatus`]. On failure a description is
//! kept per thread and read back with [`smpm_last_error_message`]. Panics
//! are caught at the boundary and reported as `SMPM_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use smpm_schur::experiments::manufactured_problem;
use smpm_schur::{build_mesh, Error, GmresOptions, SchurSolver, SolverMode};

/// Result code of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SmpmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    AssemblyFailure = 4,
    PreconditionerFailure = 5,
    RankDeficiency = 6,
    SizeLimit = 7,
    Factorization = 8,
    /// GMRES hit its iteration cap; outputs hold the last iterate.
    NotConverged = 9,
    Internal = 10,
    Panic = 11,
}

/// Schur solver variant.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SmpmMode {
    Plain = 0,
    Jacobi = 1,
    Deflated = 2,
    JacobiDeflated = 3,
}

impl From<SmpmMode> for SolverMode {
    fn from(m: SmpmMode) -> Self {
        match m {
            SmpmMode::Plain => SolverMode::Plain,
            SmpmMode::Jacobi => SolverMode::Jacobi,
            SmpmMode::Deflated => SolverMode::Deflated,
            SmpmMode::JacobiDeflated => SolverMode::JacobiDeflated,
        }
    }
}

/// Statistics of one solve.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct SmpmStats {
    pub iterations: usize,
    pub converged: bool,
    /// Last relative GMRES residual.
    pub final_residual: f64,
    pub setup_seconds: f64,
    pub solve_seconds: f64,
}

/// Opaque solver handle.
pub struct SmpmSolver {
    inner: SchurSolver,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> SmpmStatus {
    match err {
        Error::InvalidArgument(_) => SmpmStatus::InvalidArgument,
        Error::DimensionMismatch { .. } => SmpmStatus::DimensionMismatch,
        Error::AssemblyFailure(_) => SmpmStatus::AssemblyFailure,
        Error::PreconditionerFailure(_) => SmpmStatus::PreconditionerFailure,
        Error::RankDeficiency(_) | Error::NoNullSpace { .. } => SmpmStatus::RankDeficiency,
        Error::SizeLimit { .. } => SmpmStatus::SizeLimit,
        Error::Factorization(_) => SmpmStatus::Factorization,
        _ => SmpmStatus::Internal,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<SmpmStatus, (SmpmStatus, String)>) -> SmpmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(status)) => status,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            SmpmStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (SmpmStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (SmpmStatus, String) {
    (SmpmStatus::NullPointer, format!("{what} is null"))
}

fn check_len(what: &str, expected: usize, got: usize) -> Result<(), (SmpmStatus, String)> {
    if expected == got {
        Ok(())
    } else {
        Err((
            SmpmStatus::DimensionMismatch,
            format!("{what}: expected length {expected}, got {got}"),
        ))
    }
}

/// # Safety
/// `handle` must be null or a live handle from [`smpm_solver_new`].
unsafe fn solver_ref<'a>(handle: *const SmpmSolver) -> Result<&'a SchurSolver, (SmpmStatus, String)> {
    handle.as_ref().map(|h| &h.inner).ok_or_else(|| null("solver handle"))
}

/// Builds a solver for an `mx × my` grid of `n × n`-node elements on
/// `[0, lx] × [0, ly]`. A non-positive or non-finite `tau` selects the
/// default penalty. On success `*out` receives a handle to release with
/// [`smpm_solver_free`].
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn smpm_solver_new(
    n: usize,
    mx: usize,
    my: usize,
    lx: f64,
    ly: f64,
    tau: f64,
    out: *mut *mut SmpmSolver,
) -> SmpmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let tau = (tau.is_finite() && tau > 0.0).then_some(tau);
        let mesh = build_mesh(n, mx, my, lx, ly).map_err(lib_err)?;
        let inner = SchurSolver::new(mesh, tau).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(SmpmSolver { inner }));
        Ok(SmpmStatus::Ok)
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `handle` must be null or a handle from [`smpm_solver_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn smpm_solver_free(handle: *mut SmpmSolver) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Total grid nodes `r`, or 0 for a null handle.
///
/// # Safety
/// `handle` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn smpm_solver_num_nodes(handle: *const SmpmSolver) -> usize {
    solver_ref(handle).map(|s| s.ops().num_nodes()).unwrap_or(0)
}

/// Interface unknowns `k`, or 0 for a null handle.
///
/// # Safety
/// `handle` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn smpm_solver_num_interface_nodes(handle: *const SmpmSolver) -> usize {
    solver_ref(handle).map(|s| s.context().k()).unwrap_or(0)
}

/// Interface pairs `d` (deflation vectors), or 0 for a null handle.
///
/// # Safety
/// `handle` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn smpm_solver_num_pairs(handle: *const SmpmSolver) -> usize {
    solver_ref(handle).map(|s| s.context().d()).unwrap_or(0)
}

/// Penalty in use, or NaN for a null handle.
///
/// # Safety
/// `handle` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn smpm_solver_tau(handle: *const SmpmSolver) -> f64 {
    solver_ref(handle).map(|s| s.ops().tau()).unwrap_or(f64::NAN)
}

/// Writes node coordinates into `x` and `y`, each of length `len = r`.
///
/// # Safety
/// `x` and `y` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn smpm_solver_coordinates(
    handle: *const SmpmSolver,
    x: *mut f64,
    y: *mut f64,
    len: usize,
) -> SmpmStatus {
    guard(|| {
        let s = solver_ref(handle)?;
        if x.is_null() || y.is_null() {
            return Err(null("coordinate buffer"));
        }
        let coords = s.mesh().coords();
        check_len("coordinates", coords.len(), len)?;
        let (xs, ys) = (slice::from_raw_parts_mut(x, len), slice::from_raw_parts_mut(y, len));
        for ((c, xo), yo) in coords.iter().zip(xs).zip(ys) {
            *xo = c[0];
            *yo = c[1];
        }
        Ok(SmpmStatus::Ok)
    })
}

/// Samples the manufactured problem `∇²u = cos(λπx/Lx) cos(λπy/Ly)`,
/// `∂u/∂n = 0`: writes `f` and, if `u_exact` is non-null, the exact
/// solution. Buffers have length `len = r`.
///
/// # Safety
/// `f` must point to `len` writable doubles; `u_exact` likewise or be null.
#[no_mangle]
pub unsafe extern "C" fn smpm_manufactured_rhs(
    handle: *const SmpmSolver,
    lambda: u32,
    f: *mut f64,
    u_exact: *mut f64,
    len: usize,
) -> SmpmStatus {
    guard(|| {
        let s = solver_ref(handle)?;
        if f.is_null() {
            return Err(null("f"));
        }
        check_len("manufactured_rhs", s.ops().num_nodes(), len)?;
        let p = manufactured_problem(s.mesh(), lambda).map_err(lib_err)?;
        slice::from_raw_parts_mut(f, len).copy_from_slice(&p.f);
        if !u_exact.is_null() {
            slice::from_raw_parts_mut(u_exact, len).copy_from_slice(&p.u_exact);
        }
        Ok(SmpmStatus::Ok)
    })
}

/// Solves `∇²u = f`, `∂u/∂n = g` and writes the zero-mean solution to
/// `u_out`. `g` may be null for homogeneous data; otherwise it holds, at each
/// boundary node, the Neumann data summed over the physical sides through
/// it. All buffers have length `len = r`. `tol <= 0` selects 1e-10.
/// Returns `SMPM_STATUS_NOT_CONVERGED` with the last iterate written when
/// GMRES stops early. `stats` may be null.
///
/// # Safety
/// `f` and `u_out` must point to `len` doubles (`u_out` writable); `g` must
/// be null or point to `len` doubles; `stats` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn smpm_solver_solve(
    handle: *const SmpmSolver,
    f: *const f64,
    g: *const f64,
    len: usize,
    mode: SmpmMode,
    tol: f64,
    u_out: *mut f64,
    stats: *mut SmpmStats,
) -> SmpmStatus {
    guard(|| {
        let s = solver_ref(handle)?;
        if f.is_null() || u_out.is_null() {
            return Err(null("f or u_out"));
        }
        check_len("solve", s.ops().num_nodes(), len)?;
        let f = slice::from_raw_parts(f, len);
        let zeros;
        let g = if g.is_null() {
            zeros = vec![0.0; len];
            &zeros[..]
        } else {
            slice::from_raw_parts(g, len)
        };
        let opts = GmresOptions::with_tol(if tol > 0.0 { tol } else { 1e-10 });
        let sol = s.solve(f, g, mode.into(), &opts).map_err(lib_err)?;
        slice::from_raw_parts_mut(u_out, len).copy_from_slice(&sol.u);
        let rep = &sol.report;
        if !stats.is_null() {
            *stats = SmpmStats {
                iterations: rep.iterations,
                converged: rep.converged,
                final_residual: rep.residuals.last().copied().unwrap_or(0.0),
                setup_seconds: rep.setup_seconds,
                solve_seconds: rep.solve_seconds,
            };
        }
        if rep.converged {
            Ok(SmpmStatus::Ok)
        } else {
            set_error(format!("GMRES did not converge in {} iterations", rep.iterations));
            Ok(SmpmStatus::NotConverged)
        }
    })
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn smpm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn smpm_status_string(status: SmpmStatus) -> *const c_char {
    let s: &'static [u8] = match status {
        SmpmStatus::Ok => b"ok\0",
        SmpmStatus::NullPointer => b"null pointer\0",
        SmpmStatus::InvalidArgument => b"invalid argument\0",
        SmpmStatus::DimensionMismatch => b"dimension mismatch\0",
        SmpmStatus::AssemblyFailure => b"assembly failure\0",
        SmpmStatus::PreconditionerFailure => b"preconditioner failure\0",
        SmpmStatus::RankDeficiency => b"rank deficiency\0",
        SmpmStatus::SizeLimit => b"size limit exceeded\0",
        SmpmStatus::Factorization => b"factorization failure\0",
        SmpmStatus::NotConverged => b"not converged\0",
        SmpmStatus::Internal => b"internal error\0",
        SmpmStatus::Panic => b"panic\0",
    };
    s.as_ptr().cast()
}
