//! C ABI over `rulab`.
//!
//! Handles are opaque pointers created by `rulab_*_new`-style constructors
//! and released with the matching `*_free`. Every fallible call returns a
//! [`RulabStatus`]; on failure `rulab_last_error_message` describes the
//! problem for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use rulab::config::ConfigTree;
use rulab::solver::SolveStatus;
use rulab::{
    apply_a, estimate_lambda_p, scalar_closed_form, solve_fixed_point, ByConstantVol, ByStochVol, DiscreteOperator,
    Error, FiniteChain, McSettings, ModelSpec, PreferenceSpec, ShockSpec,
};

/// Opaque model handle.
pub struct RulabModel(ModelSpec);

/// Opaque preference handle.
pub struct RulabPreferences(PreferenceSpec);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RulabStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    Unsupported = 3,
    NoConvergence = 4,
    Overflow = 5,
    Config = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RulabSolveStatus {
    Converged = 0,
    CollapsedToZero = 1,
    Diverged = 2,
    MaxIter = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RulabLambdaEstimate {
    pub lambda_p: f64,
    pub rho_hat: f64,
    pub std_error: f64,
    pub lambda_std_error: f64,
    pub rho_hat_half: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RulabSolveResult {
    pub status: RulabSolveStatus,
    pub iterations: usize,
    pub final_residual: f64,
    /// Number of grid nodes; entries written to the output buffer.
    pub len: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &Error) -> RulabStatus {
    match err {
        Error::Domain(_) => RulabStatus::Domain,
        Error::Unsupported(_) => RulabStatus::Unsupported,
        Error::NoConvergence { .. } => RulabStatus::NoConvergence,
        Error::Overflow(_) => RulabStatus::Overflow,
    }
}

struct Failure(RulabStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(RulabStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, recording any error or panic for `rulab_last_error_message`.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> RulabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            RulabStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            RulabStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next `rulab_*` call on the same thread.
#[no_mangle]
pub extern "C" fn rulab_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Static version string.
#[no_mangle]
pub extern "C" fn rulab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `out` must be a valid pointer to writable storage for one handle pointer.
#[no_mangle]
pub unsafe extern "C" fn rulab_preferences_new(
    beta: f64,
    gamma: f64,
    psi: f64,
    out: *mut *mut RulabPreferences,
) -> RulabStatus {
    guard(|| {
        let prefs = PreferenceSpec::new(beta, gamma, psi)?;
        write_out(out, boxed(RulabPreferences(prefs)), "out")
    })
}

/// # Safety
/// `prefs` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rulab_preferences_free(prefs: *mut RulabPreferences) {
    if !prefs.is_null() {
        drop(Box::from_raw(prefs));
    }
}

/// `theta = (1 - gamma) / (1 - 1/psi)`.
///
/// # Safety
/// `prefs` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rulab_preferences_theta(prefs: *const RulabPreferences, out: *mut f64) -> RulabStatus {
    guard(|| write_out(out, deref(prefs, "prefs")?.0.theta(), "out"))
}

/// `beta * rho^(1/theta)` for a given spectral radius.
///
/// # Safety
/// `prefs` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rulab_stability_coefficient(
    prefs: *const RulabPreferences,
    rho: f64,
    out: *mut f64,
) -> RulabStatus {
    guard(|| write_out(out, deref(prefs, "prefs")?.0.stability_coefficient(rho), "out"))
}

unsafe fn emit_model(model: ModelSpec, out: *mut *mut RulabModel) -> Result<(), Failure> {
    model.validate()?;
    write_out(out, boxed(RulabModel(model)), "out")
}

/// Constant-volatility long-run risk model.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rulab_model_by_constant_vol(
    mu_c: f64,
    rho: f64,
    sigma: f64,
    out: *mut *mut RulabModel,
) -> RulabStatus {
    guard(|| emit_model(ByConstantVol::new(mu_c, rho, sigma)?.into(), out))
}

/// Stochastic-volatility model with the monthly reference calibration.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rulab_model_by_stoch_vol_reference(out: *mut *mut RulabModel) -> RulabStatus {
    guard(|| emit_model(ByStochVol::table1().into(), out))
}

/// Finite Markov chain from row-major `n x n` transition and growth tables.
///
/// # Safety
/// `transition` and `growth` must each point to `n * n` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn rulab_model_finite_chain(
    n: usize,
    transition: *const f64,
    growth: *const f64,
    out: *mut *mut RulabModel,
) -> RulabStatus {
    guard(|| {
        if transition.is_null() || growth.is_null() {
            return Err(null("transition or growth"));
        }
        let len = n
            .checked_mul(n)
            .ok_or_else(|| Failure(RulabStatus::Domain, "n too large".into()))?;
        let rows = |p: *const f64| -> Vec<Vec<f64>> {
            let flat = std::slice::from_raw_parts(p, len);
            flat.chunks(n.max(1)).map(<[f64]>::to_vec).collect()
        };
        emit_model(FiniteChain::new(rows(transition), rows(growth))?.into(), out)
    })
}

/// One-state model whose valuation operator is multiplication by `kernel`.
///
/// # Safety
/// `prefs` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rulab_model_singleton(
    kernel: f64,
    prefs: *const RulabPreferences,
    out: *mut *mut RulabModel,
) -> RulabStatus {
    guard(|| {
        let prefs = deref(prefs, "prefs")?;
        emit_model(FiniteChain::singleton(kernel, prefs.0.one_minus_gamma())?.into(), out)
    })
}

/// Loads the `[model]` and `[preferences]` sections of a TOML run config.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out_model` and `out_prefs` writable.
#[no_mangle]
pub unsafe extern "C" fn rulab_model_from_config(
    path: *const c_char,
    out_model: *mut *mut RulabModel,
    out_prefs: *mut *mut RulabPreferences,
) -> RulabStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out_model.is_null() || out_prefs.is_null() {
            return Err(null("out"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Failure(RulabStatus::Config, "path is not UTF-8".into()))?;
        let config_err = |e: rulab::ConfigError| Failure(RulabStatus::Config, e.to_string());
        let cfg = ConfigTree::load(Path::new(path))
            .and_then(|t| t.validated())
            .map_err(config_err)?;
        let model = cfg.build_model().map_err(config_err)?;
        out_model.write(boxed(RulabModel(model)));
        out_prefs.write(boxed(RulabPreferences(cfg.preferences)));
        Ok(())
    })
}

/// # Safety
/// `model` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rulab_model_free(model: *mut RulabModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// State-space dimension of the model.
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rulab_model_dim(model: *const RulabModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.dim())
}

/// Monte Carlo estimate of `Lambda_p` from stationary initial states.
///
/// # Safety
/// Handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rulab_estimate_lambda(
    model: *const RulabModel,
    prefs: *const RulabPreferences,
    p: f64,
    n: usize,
    m: usize,
    paths: usize,
    seed: u64,
    out: *mut RulabLambdaEstimate,
) -> RulabStatus {
    guard(|| {
        let settings = McSettings {
            p,
            n,
            m,
            j: paths,
            seed,
            ..McSettings::default()
        };
        let est = estimate_lambda_p(&deref(model, "model")?.0, &deref(prefs, "prefs")?.0, &settings)?;
        write_out(
            out,
            RulabLambdaEstimate {
                lambda_p: est.lambda_p,
                rho_hat: est.rho_hat,
                std_error: est.std_error,
                lambda_std_error: est.lambda_std_error,
                rho_hat_half: est.rho_hat_half,
            },
            "out",
        )
    })
}

/// Spectral radius of the discretized operator by power iteration.
/// `nodes` and `span` are ignored for finite chains.
///
/// # Safety
/// Handles must be live and `out_rho` writable.
#[no_mangle]
pub unsafe extern "C" fn rulab_spectral_radius(
    model: *const RulabModel,
    prefs: *const RulabPreferences,
    nodes: usize,
    span: f64,
    tol: f64,
    max_iter: usize,
    out_rho: *mut f64,
) -> RulabStatus {
    guard(|| {
        let op = DiscreteOperator::build(&deref(model, "model")?.0, &deref(prefs, "prefs")?.0, nodes, span)?;
        write_out(out_rho, op.spectral_radius_power(tol, max_iter)?.rho, "out_rho")
    })
}

/// Fixed point of the one-state time-preference operator. Writes
/// `has_solution = false` when `beta * k^(1/theta) >= 1`.
///
/// # Safety
/// `prefs` must be live; `out_g` and `has_solution` writable.
#[no_mangle]
pub unsafe extern "C" fn rulab_scalar_closed_form(
    prefs: *const RulabPreferences,
    k: f64,
    xi: f64,
    out_g: *mut f64,
    has_solution: *mut bool,
) -> RulabStatus {
    guard(|| {
        let g = scalar_closed_form(&deref(prefs, "prefs")?.0, k, xi)?;
        write_out(has_solution, g.is_some(), "has_solution")?;
        write_out(out_g, g.unwrap_or(f64::NAN), "out_g")
    })
}

/// Iterates the time-preference operator with constant `lambda` from
/// `g = initial` on the model grid. Writes the solution to `out_g` when the
/// iteration converges or stops at `max_iter`.
///
/// # Safety
/// Handles must be live, `out_g` must hold `out_len` doubles (it may be NULL
/// when `out_len` is 0) and `out_result` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rulab_solve(
    model: *const RulabModel,
    prefs: *const RulabPreferences,
    nodes: usize,
    span: f64,
    lambda: f64,
    initial: f64,
    tol: f64,
    max_iter: usize,
    out_g: *mut f64,
    out_len: usize,
    out_result: *mut RulabSolveResult,
) -> RulabStatus {
    guard(|| {
        let prefs = &deref(prefs, "prefs")?.0;
        let op = DiscreteOperator::build(&deref(model, "model")?.0, prefs, nodes, span)?;
        let shock = ShockSpec::new(vec![lambda; op.len()])?;
        let report = solve_fixed_point(
            |g| apply_a(&op, prefs, &shock, g),
            &vec![initial; op.len()],
            tol,
            max_iter,
        )?;
        let status = match report.status {
            SolveStatus::Converged => RulabSolveStatus::Converged,
            SolveStatus::CollapsedToZero => RulabSolveStatus::CollapsedToZero,
            SolveStatus::Diverged => RulabSolveStatus::Diverged,
            SolveStatus::MaxIter => RulabSolveStatus::MaxIter,
        };
        write_out(
            out_result,
            RulabSolveResult {
                status,
                iterations: report.iterations,
                final_residual: report.final_residual,
                len: op.len(),
            },
            "out_result",
        )?;
        if let Some(g) = report.solution {
            if out_len < g.len() {
                return Err(Failure(
                    RulabStatus::BufferTooSmall,
                    format!("solution has {} entries, buffer holds {out_len}", g.len()),
                ));
            }
            if out_g.is_null() {
                return Err(null("out_g"));
            }
            ptr::copy_nonoverlapping(g.as_ptr(), out_g, g.len());
        }
        Ok(())
    })
}
