//! C ABI over `dpd-core`.
//!
//! Every function returns a [`DpdStatus`]. On failure the message is
//! available from [`dpd_last_error_message`] on the same thread. Handles are
//! opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use dpd_core::harness::{self, AlgorithmSelector, Prepared};
use dpd_core::{load_scenario, parse_scenario, pd_step, Error, ErrorCategory, PdState, Problem, Scenario};

/// Result codes. The input, numerical, oracle and I/O codes match the exit
/// codes of the `dpd` command-line tool.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DpdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidString = 2,
    Input = 3,
    Numerical = 4,
    Oracle = 5,
    Io = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Algorithm selector for [`dpd_run`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DpdAlgorithm {
    Pd = 0,
    DgdConst = 1,
    Dgd075 = 2,
    Dgd04 = 3,
    All = 4,
}

impl From<DpdAlgorithm> for AlgorithmSelector {
    fn from(a: DpdAlgorithm) -> Self {
        match a {
            DpdAlgorithm::Pd => AlgorithmSelector::Pd,
            DpdAlgorithm::DgdConst => AlgorithmSelector::DgdConst,
            DpdAlgorithm::Dgd075 => AlgorithmSelector::Dgd075,
            DpdAlgorithm::Dgd04 => AlgorithmSelector::Dgd04,
            DpdAlgorithm::All => AlgorithmSelector::All,
        }
    }
}

/// Step-size admissibility. `c_r` is NaN when undefined.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DpdStepSizeReport {
    pub alpha: f64,
    pub kappa_n: f64,
    pub bound_spectral: f64,
    pub l_r: f64,
    pub bound_lipschitz: f64,
    pub spectral_ok: bool,
    pub lipschitz_ok: bool,
    pub admissible: bool,
    pub r: f64,
    pub lambda_min_m: f64,
    pub lambda_min_w_shifted: f64,
    pub c_r: f64,
    pub v0: f64,
}

/// Opaque scenario handle.
pub struct DpdScenario {
    inner: Scenario,
}

/// Opaque primal-dual iteration state bound to a scenario's problem.
pub struct DpdSolver {
    problem: Problem,
    state: PdState,
    alpha: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> DpdStatus {
    match e.category() {
        ErrorCategory::Input => DpdStatus::Input,
        ErrorCategory::Numerical => DpdStatus::Numerical,
        ErrorCategory::Oracle => DpdStatus::Oracle,
        ErrorCategory::Io => DpdStatus::Io,
    }
}

struct Failure(DpdStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DpdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            DpdStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside dpd".into());
            DpdStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(DpdStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(DpdStatus::InvalidString, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, len: usize) -> Result<(), Failure> {
    if buf.is_null() {
        return Err(null("buffer"));
    }
    if len < src.len() {
        return Err(Failure(DpdStatus::BufferTooSmall, format!("buffer holds {len} values, {} needed", src.len())));
    }
    std::ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(())
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn dpd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dpd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

fn boxed_scenario(s: Scenario, out: *mut *mut DpdScenario) -> Result<(), Failure> {
    // SAFETY: caller checked `out` is non-null.
    unsafe { *out = Box::into_raw(Box::new(DpdScenario { inner: s })) };
    Ok(())
}

/// Loads and validates a scenario file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn dpd_scenario_load(path: *const c_char, out: *mut *mut DpdScenario) -> DpdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = str_arg(path, "path")?;
        boxed_scenario(load_scenario(PathBuf::from(path))?, out)
    })
}

/// Parses and validates a scenario from JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn dpd_scenario_from_json(json: *const c_char, out: *mut *mut DpdScenario) -> DpdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        boxed_scenario(parse_scenario(str_arg(json, "json")?)?, out)
    })
}

/// Releases a scenario. Null is ignored.
///
/// # Safety
/// `scenario` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dpd_scenario_free(scenario: *mut DpdScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Writes the agent count `n` and block dimension `m`.
///
/// # Safety
/// `scenario` must be a live handle; `n` and `m` writable pointers.
#[no_mangle]
pub unsafe extern "C" fn dpd_scenario_shape(scenario: *const DpdScenario, n: *mut usize, m: *mut usize) -> DpdStatus {
    guard(|| {
        let s = &handle(scenario, "scenario")?.inner;
        if n.is_null() || m.is_null() {
            return Err(null("output"));
        }
        *n = s.n();
        *m = s.dim()?;
        Ok(())
    })
}

/// Computes the oracle solution and the step-size report for the
/// scenario's `alpha`.
///
/// # Safety
/// `scenario` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dpd_validate(scenario: *const DpdScenario, out: *mut DpdStepSizeReport) -> DpdStatus {
    guard(|| {
        let s = &handle(scenario, "scenario")?.inner;
        if out.is_null() {
            return Err(null("out"));
        }
        let p = Prepared::new(s)?;
        let r = p.step_size.map_err(|msg| Failure(DpdStatus::Oracle, msg))?;
        *out = DpdStepSizeReport {
            alpha: r.alpha,
            kappa_n: r.kappa_n,
            bound_spectral: r.bound_spectral,
            l_r: r.l_r,
            bound_lipschitz: r.bound_lipschitz,
            spectral_ok: r.spectral_ok,
            lipschitz_ok: r.lipschitz_ok,
            admissible: r.admissible,
            r: r.r,
            lambda_min_m: r.lambda_min_m,
            lambda_min_w_shifted: r.lambda_min_w_shifted,
            c_r: r.c_r.unwrap_or(f64::NAN),
            v0: r.v0,
        };
        Ok(())
    })
}

/// Centralized solution: writes `x*` (length `m`) and `f*`.
///
/// # Safety
/// `scenario` must be a live handle, `x_star` valid for `len` writes and
/// `f_star` writable.
#[no_mangle]
pub unsafe extern "C" fn dpd_oracle(
    scenario: *const DpdScenario,
    x_star: *mut f64,
    len: usize,
    f_star: *mut f64,
) -> DpdStatus {
    guard(|| {
        let s = &handle(scenario, "scenario")?.inner;
        if f_star.is_null() {
            return Err(null("f_star"));
        }
        let sol = harness::oracle_for(&s.build()?)?;
        copy_out(&sol.x_star, x_star, len)?;
        *f_star = sol.f_star;
        Ok(())
    })
}

/// Runs the selected algorithms and writes traces and `report.json` to
/// `out_dir`.
///
/// # Safety
/// `scenario` must be a live handle and `out_dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn dpd_run(scenario: *const DpdScenario, algorithm: DpdAlgorithm, out_dir: *const c_char) -> DpdStatus {
    guard(|| {
        let s = &handle(scenario, "scenario")?.inner;
        let dir = PathBuf::from(str_arg(out_dir, "out_dir")?);
        harness::run(s, algorithm.into(), Some(&dir))?;
        Ok(())
    })
}

/// Creates a primal-dual iteration at the scenario's initial state.
///
/// # Safety
/// `scenario` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dpd_solver_new(scenario: *const DpdScenario, out: *mut *mut DpdSolver) -> DpdStatus {
    guard(|| {
        let s = &handle(scenario, "scenario")?.inner;
        if out.is_null() {
            return Err(null("out"));
        }
        let problem = s.build()?;
        let state = s.initial_state(problem.dim());
        *out = Box::into_raw(Box::new(DpdSolver { problem, state, alpha: s.alpha }));
        Ok(())
    })
}

/// Advances the iteration by `steps` primal-dual steps. On a numerical
/// failure the state is left at the last finite iterate.
///
/// # Safety
/// `solver` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn dpd_solver_step(solver: *mut DpdSolver, steps: usize) -> DpdStatus {
    guard(|| {
        let s = solver.as_mut().ok_or_else(|| null("solver"))?;
        for _ in 0..steps {
            s.state = pd_step(&s.problem, &s.state, s.alpha)?;
        }
        Ok(())
    })
}

/// Writes the iteration counter `k`.
///
/// # Safety
/// `solver` must be a live handle and `k` writable.
#[no_mangle]
pub unsafe extern "C" fn dpd_solver_iteration(solver: *const DpdSolver, k: *mut usize) -> DpdStatus {
    guard(|| {
        let s = handle(solver, "solver")?;
        if k.is_null() {
            return Err(null("k"));
        }
        *k = s.state.k;
        Ok(())
    })
}

/// Copies the stacked primal iterate `X_k` (length `n·m`).
///
/// # Safety
/// `solver` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn dpd_solver_primal(solver: *const DpdSolver, buf: *mut f64, len: usize) -> DpdStatus {
    guard(|| copy_out(handle(solver, "solver")?.state.x.as_slice(), buf, len))
}

/// Copies the stacked dual iterate `Λ_k` (length `n·m`).
///
/// # Safety
/// `solver` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn dpd_solver_dual(solver: *const DpdSolver, buf: *mut f64, len: usize) -> DpdStatus {
    guard(|| copy_out(handle(solver, "solver")?.state.lambda.as_slice(), buf, len))
}

/// Releases a solver. Null is ignored.
///
/// # Safety
/// `solver` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dpd_solver_free(solver: *mut DpdSolver) {
    if !solver.is_null() {
        drop(Box::from_raw(solver));
    }
}
