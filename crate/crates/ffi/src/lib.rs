//! C interface to the precision and regression samplers.
//!
//! Every fallible function returns a [`UsStatus`]; on failure the message is
//! kept per thread and read with [`us_last_error`]. Objects are opaque and
//! released with their `*_free` function. Matrices are row-major `double`
//! arrays.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nalgebra::{DMatrix, DVector};
use unishrink::bench::BenchPrior;
use unishrink::precision::{run_chain, ChainConfig, ChainOutput, ConstraintLedger, PrecisionModel};
use unishrink::priors::PriorSpec;
use unishrink::regression::{run_regression_chain, RegressionData, RegressionModel, RegressionOutput};
use unishrink::Error;

/// Result of a call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UsStatus {
    Ok = 0,
    NullPointer = 1,
    /// Bad configuration, JSON, dimensions or hyperparameters.
    InvalidArgument = 2,
    /// Non-SPD input, degenerate data or a sampler failure.
    Numerical = 3,
    Io = 4,
    /// The output buffer is shorter than required.
    BufferTooSmall = 5,
    /// A Rust panic was caught at the boundary.
    Internal = 6,
}

/// A shrinkage prior with its global-scale hyperprior.
pub struct UsPrior(BenchPrior);

/// Output of a precision-matrix chain.
pub struct UsPrecisionFit(ChainOutput);

/// Output of a regression chain.
pub struct UsRegressionFit(RegressionOutput);

/// Chain schedule. Draws are kept after `burnin` sweeps, every `thin`-th.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct UsChainOptions {
    pub iters: u64,
    pub burnin: u64,
    pub thin: u64,
    pub seed: u64,
    /// Keep the individual draws, not only their means.
    pub store_draws: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: UsStatus, message: impl Into<String>) -> UsStatus {
    set_error(message.into());
    status
}

fn from_error(e: Error) -> UsStatus {
    let status = match e.exit_code() {
        2 => UsStatus::InvalidArgument,
        4 => UsStatus::Io,
        _ => UsStatus::Numerical,
    };
    fail(status, e.to_string())
}

fn guard<F: FnOnce() -> UsStatus>(f: F) -> UsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(UsStatus::Internal, format!("internal error: {msg}"))
        }
    }
}

fn copy_out(src: &[f64], buf: *mut f64, len: usize) -> UsStatus {
    if buf.is_null() {
        return fail(UsStatus::NullPointer, "output buffer is null");
    }
    if len < src.len() {
        return fail(
            UsStatus::BufferTooSmall,
            format!("buffer holds {len} values, {} required", src.len()),
        );
    }
    unsafe { ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len()) };
    UsStatus::Ok
}

fn chain_config(opts: &UsChainOptions) -> ChainConfig {
    ChainConfig {
        iters: opts.iters as usize,
        burnin: opts.burnin as usize,
        thin: opts.thin as usize,
        seed: opts.seed,
        store_draws: opts.store_draws,
        ..ChainConfig::default()
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn us_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn us_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Default schedule: 15000 sweeps, 5000 burn-in, no thinning, seed 0.
#[no_mangle]
pub extern "C" fn us_chain_options_default() -> UsChainOptions {
    let c = ChainConfig::default();
    UsChainOptions {
        iters: c.iters as u64,
        burnin: c.burnin as u64,
        thin: c.thin as u64,
        seed: c.seed,
        store_draws: c.store_draws,
    }
}

/// Parses a prior from JSON, e.g. `{"family":"ep","q":0.2}` or
/// `{"family":"log","tau":{"half_cauchy":1}}`. Omitting `tau` selects the
/// family's default hyperprior.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn us_prior_from_json(json: *const c_char, out: *mut *mut UsPrior) -> UsStatus {
    guard(|| {
        if json.is_null() || out.is_null() {
            return fail(UsStatus::NullPointer, "null argument");
        }
        let text = match CStr::from_ptr(json).to_str() {
            Ok(t) => t,
            Err(e) => return fail(UsStatus::InvalidArgument, format!("prior JSON is not UTF-8: {e}")),
        };
        let prior: BenchPrior = match serde_json::from_str(text) {
            Ok(p) => p,
            Err(e) => return fail(UsStatus::InvalidArgument, format!("prior JSON: {e}")),
        };
        if let Err(e) = prior.family.validate().and_then(|_| prior.hyper().validate(&prior.family)) {
            return from_error(e);
        }
        *out = Box::into_raw(Box::new(UsPrior(prior)));
        UsStatus::Ok
    })
}

/// # Safety
/// `prior` must come from [`us_prior_from_json`] or be NULL.
#[no_mangle]
pub unsafe extern "C" fn us_prior_free(prior: *mut UsPrior) {
    if !prior.is_null() {
        drop(Box::from_raw(prior));
    }
}

/// Log prior density (up to its constant) of `theta` at global scale `tau`.
///
/// # Safety
/// `prior` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn us_prior_log_density(
    prior: *const UsPrior,
    tau: f64,
    theta: f64,
    out: *mut f64,
) -> UsStatus {
    guard(|| {
        if prior.is_null() || out.is_null() {
            return fail(UsStatus::NullPointer, "null argument");
        }
        match PriorSpec::new((*prior).0.family, tau).and_then(|s| s.log_density(theta)) {
            Ok(v) => {
                *out = v;
                UsStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Latent scale `t` with survival `P(T > t | theta) = u`.
///
/// # Safety
/// `prior` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn us_prior_inverse_cdf(
    prior: *const UsPrior,
    tau: f64,
    theta: f64,
    u: f64,
    out: *mut f64,
) -> UsStatus {
    guard(|| {
        if prior.is_null() || out.is_null() {
            return fail(UsStatus::NullPointer, "null argument");
        }
        match PriorSpec::new((*prior).0.family, tau).and_then(|s| s.inverse_conditional_cdf(theta, u)) {
            Ok(v) => {
                *out = v;
                UsStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Samples the posterior of a `p x p` precision matrix given the scatter
/// matrix `s` (row-major) of `n` centred observations, on the complete graph.
///
/// # Safety
/// `s` must hold `p * p` values; `prior`, `options` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn us_fit_precision(
    prior: *const UsPrior,
    s: *const f64,
    p: usize,
    n: f64,
    options: *const UsChainOptions,
    out: *mut *mut UsPrecisionFit,
) -> UsStatus {
    guard(|| {
        if prior.is_null() || s.is_null() || options.is_null() || out.is_null() {
            return fail(UsStatus::NullPointer, "null argument");
        }
        if p == 0 {
            return fail(UsStatus::InvalidArgument, "p must be positive");
        }
        let prior = &(*prior).0;
        let s = DMatrix::from_row_slice(p, p, std::slice::from_raw_parts(s, p * p));
        let result = PrecisionModel::new(prior.family, prior.hyper(), ConstraintLedger::new(p))
            .and_then(|m| run_chain(&m, &s, n, None, &chain_config(&*options)));
        match result {
            Ok(fit) => {
                *out = Box::into_raw(Box::new(UsPrecisionFit(fit)));
                UsStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `fit` must come from [`us_fit_precision`] or be NULL.
#[no_mangle]
pub unsafe extern "C" fn us_precision_fit_free(fit: *mut UsPrecisionFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// Dimension `p`, or 0 for NULL.
///
/// # Safety
/// `fit` must be valid or NULL.
#[no_mangle]
pub unsafe extern "C" fn us_precision_fit_dim(fit: *const UsPrecisionFit) -> usize {
    fit.as_ref().map_or(0, |f| f.0.p)
}

/// Number of stored draws, or 0 for NULL.
///
/// # Safety
/// `fit` must be valid or NULL.
#[no_mangle]
pub unsafe extern "C" fn us_precision_fit_num_draws(fit: *const UsPrecisionFit) -> usize {
    fit.as_ref().map_or(0, |f| f.0.draws.len())
}

/// Fraction of truncated draws that needed the underflow fallback, or NaN
/// for NULL.
///
/// # Safety
/// `fit` must be valid or NULL.
#[no_mangle]
pub unsafe extern "C" fn us_precision_fit_fallback_rate(fit: *const UsPrecisionFit) -> f64 {
    fit.as_ref().map_or(f64::NAN, |f| f.0.diagnostics.fallback_rate)
}

/// Copies the posterior mean of the precision matrix (`p * p`, row-major).
///
/// # Safety
/// `fit` must be valid and `buf` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn us_precision_fit_mean_omega(
    fit: *const UsPrecisionFit,
    buf: *mut f64,
    len: usize,
) -> UsStatus {
    guard(|| match fit.as_ref() {
        None => fail(UsStatus::NullPointer, "fit is null"),
        Some(f) => copy_out(f.0.mean_omega.transpose().as_slice(), buf, len),
    })
}

/// Copies stored draw `k` as a lower triangle in row order (`p (p + 1) / 2`
/// values).
///
/// # Safety
/// `fit` must be valid and `buf` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn us_precision_fit_draw(
    fit: *const UsPrecisionFit,
    k: usize,
    buf: *mut f64,
    len: usize,
) -> UsStatus {
    guard(|| match fit.as_ref() {
        None => fail(UsStatus::NullPointer, "fit is null"),
        Some(f) => match f.0.draws.get(k) {
            Some(d) => copy_out(d, buf, len),
            None => fail(
                UsStatus::InvalidArgument,
                format!("draw {k} out of range ({} stored)", f.0.draws.len()),
            ),
        },
    })
}

/// Samples the posterior of `β` in `y = Xβ + ε` under the shrinkage prior.
/// `x` is `n x p` row-major and `y` has `n` values.
///
/// # Safety
/// `x` and `y` must hold `n * p` and `n` values; the other pointers must be
/// valid.
#[no_mangle]
pub unsafe extern "C" fn us_fit_regression(
    prior: *const UsPrior,
    x: *const f64,
    y: *const f64,
    n: usize,
    p: usize,
    options: *const UsChainOptions,
    out: *mut *mut UsRegressionFit,
) -> UsStatus {
    guard(|| {
        if prior.is_null() || x.is_null() || y.is_null() || options.is_null() || out.is_null() {
            return fail(UsStatus::NullPointer, "null argument");
        }
        if n == 0 || p == 0 {
            return fail(UsStatus::InvalidArgument, "n and p must be positive");
        }
        let prior = &(*prior).0;
        let xm = DMatrix::from_row_slice(n, p, std::slice::from_raw_parts(x, n * p));
        let yv = DVector::from_column_slice(std::slice::from_raw_parts(y, n));
        let result = RegressionData::new(xm, yv).and_then(|data| {
            RegressionModel::new(prior.family, prior.hyper())
                .and_then(|m| run_regression_chain(&data, &m, &chain_config(&*options)))
        });
        match result {
            Ok(fit) => {
                *out = Box::into_raw(Box::new(UsRegressionFit(fit)));
                UsStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `fit` must come from [`us_fit_regression`] or be NULL.
#[no_mangle]
pub unsafe extern "C" fn us_regression_fit_free(fit: *mut UsRegressionFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// Copies the posterior mean of `β` (`p` values).
///
/// # Safety
/// `fit` must be valid and `buf` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn us_regression_fit_mean_beta(
    fit: *const UsRegressionFit,
    buf: *mut f64,
    len: usize,
) -> UsStatus {
    guard(|| match fit.as_ref() {
        None => fail(UsStatus::NullPointer, "fit is null"),
        Some(f) => copy_out(f.0.mean_beta.as_slice(), buf, len),
    })
}

/// Posterior mean of the noise variance, or NaN for NULL.
///
/// # Safety
/// `fit` must be valid or NULL.
#[no_mangle]
pub unsafe extern "C" fn us_regression_fit_mean_sigma2(fit: *const UsRegressionFit) -> f64 {
    fit.as_ref().map_or(f64::NAN, |f| f.0.mean_sigma2)
}
