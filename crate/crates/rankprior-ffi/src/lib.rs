//! C ABI for the [`rankprior`] library.
//!
//! This crate exposes the core scoring, ranking, fitting, and equal-score
//! curve operations behind a small, stable C interface so that other
//! languages can bind them. The committed header lives at
//! `include/rankprior.h` and is generated with cbindgen (see
//! `cbindgen.toml`).
//!
//! # Conventions
//!
//! - Every fallible function returns an [`RpStatus`] and writes its results
//!   through out-pointers. [`RpStatus::Ok`] guarantees that every non-null
//!   out-pointer has been filled.
//! - Failures store a message in thread-local storage, readable with
//!   [`rp_last_error_message`]; a successful call resets the message to the
//!   empty string.
//! - [`RpPrior`] is an opaque handle created by the `rp_prior_*`
//!   constructors and released with [`rp_prior_free`]. Strings returned
//!   through `char**` are released with [`rp_string_free`]. Passing NULL to
//!   either free function is a no-op.
//! - No function retains the pointers it is given; input buffers only need
//!   to outlive the call.
//! - Every entry point catches Rust panics at the boundary and converts
//!   them to [`RpStatus::Panic`] rather than unwinding into C.
//!
//! # Safety
//!
//! Callers must honor the stated pointer contracts (valid, correctly sized
//! buffers); within those contracts no function exhibits undefined
//! behavior. All entry points are `unsafe extern "C"` because the contracts
//! cannot be checked from the Rust side.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use rankprior::{
    fit_npmle, fit_tail_exponential, fit_tail_normal, fit_tail_pareto, isotaxis_curve,
    posterior_mean, posterior_mean_approx, rank_units, Error, NpmleConfig, Observation,
    PriorSpec, TailSample,
};

/// Status code returned by every fallible function in this interface.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RpStatus {
    /// Success; all requested outputs were written.
    Ok = 0,
    /// A required pointer argument was NULL.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    Utf8 = 2,
    /// An argument value was rejected (bad parameter, malformed input).
    InvalidArgument = 3,
    /// Input data could not be parsed or contained no usable rows.
    InvalidData = 4,
    /// The operation is not defined for this prior family.
    Unsupported = 5,
    /// An evaluation was requested outside the function's domain.
    Domain = 6,
    /// A numerical routine failed to converge or lost accuracy.
    Numerical = 7,
    /// An estimation procedure failed on the given data.
    Estimation = 8,
    /// An internal panic was caught at the language boundary.
    Panic = 9,
}

/// Tail family selector for [`rp_fit_tail`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RpTailFamily {
    /// Centered normal prior; the fitted parameter is the scale `tau`.
    Normal = 0,
    /// Exponential prior; the fitted parameter is the rate `lambda`.
    Exponential = 1,
    /// Pareto prior; the fitted parameter is the tail index `alpha`.
    Pareto = 2,
}

/// Options for [`rp_fit_npmle`]. Pass NULL to use the library defaults
/// (grid_size 400, max_iterations 5000, loglik_tolerance 1e-10,
/// weight_prune_threshold 1e-12).
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RpNpmleOptions {
    /// Number of evenly spaced candidate support points added alongside the
    /// observed estimates (0 keeps only the observed values).
    pub grid_size: usize,
    /// Hard cap on EM iterations; must be at least 1.
    pub max_iterations: usize,
    /// Convergence threshold on the change in marginal log-likelihood.
    pub loglik_tolerance: f64,
    /// Support weights below this are pruned after convergence, in (0, 1).
    pub weight_prune_threshold: f64,
}

/// Fit diagnostics filled in by [`rp_fit_npmle`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RpNpmleReport {
    /// Marginal log-likelihood of the fitted prior on the input data.
    pub log_likelihood: f64,
    /// Maximum gradient ratio over the candidate grid; values at most
    /// `1 + 1e-6` certify first-order optimality of the fit.
    pub max_gradient_ratio: f64,
    /// EM iterations actually run.
    pub iterations: usize,
    /// Whether the log-likelihood change dropped below the tolerance before
    /// the iteration cap. `false` is a warning, not a failure: the best
    /// iterate is still returned.
    pub converged: bool,
}

/// Opaque handle to a prior distribution. Create with the `rp_prior_*`
/// constructors, release with [`rp_prior_free`].
pub struct RpPrior {
    inner: PriorSpec,
}

thread_local! {
    /// Message for the most recent failing call on this thread.
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

/// A failure to be reported across the boundary: a status code plus the
/// message stored for [`rp_last_error_message`].
struct Failure {
    status: RpStatus,
    message: String,
}

impl Failure {
    fn new(status: RpStatus, message: impl Into<String>) -> Self {
        Failure { status, message: message.into() }
    }

    fn null(name: &str) -> Self {
        Failure::new(RpStatus::NullArgument, format!("{name} must not be NULL"))
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        let status = match &err {
            Error::InvalidArgument(_) => RpStatus::InvalidArgument,
            Error::InvalidData(_) | Error::Io(_) | Error::Csv(_) | Error::Json(_) => {
                RpStatus::InvalidData
            }
            Error::Unsupported { .. } => RpStatus::Unsupported,
            Error::Domain(_) => RpStatus::Domain,
            Error::Numerical(_) | Error::DivergentIntegral(_) => RpStatus::Numerical,
            Error::Estimation(_) => RpStatus::Estimation,
        };
        Failure::new(status, err.to_string())
    }
}

fn store_error(message: &str) {
    // Interior NULs cannot appear in a C string; replace rather than fail.
    let clean: String =
        message.chars().map(|c| if c == '\0' { '\u{FFFD}' } else { c }).collect();
    let cstring = CString::new(clean).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = cstring);
}

/// Run an entry-point body with panic containment and error bookkeeping.
fn boundary(body: impl FnOnce() -> Result<(), Failure>) -> RpStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            store_error("");
            RpStatus::Ok
        }
        Ok(Err(failure)) => {
            store_error(&failure.message);
            failure.status
        }
        Err(payload) => {
            let text = if let Some(s) = payload.downcast_ref::<&str>() {
                (*s).to_string()
            } else if let Some(s) = payload.downcast_ref::<String>() {
                s.clone()
            } else {
                "unknown internal panic".to_string()
            };
            store_error(&format!("internal panic: {text}"));
            RpStatus::Panic
        }
    }
}

/// View a `(ptr, len)` pair as a slice, treating `len == 0` as an empty
/// slice regardless of the pointer.
unsafe fn slice_arg<'a>(name: &str, ptr: *const f64, len: usize) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(Failure::null(name));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn prior_arg<'a>(prior: *const RpPrior) -> Result<&'a PriorSpec, Failure> {
    if prior.is_null() {
        return Err(Failure::null("prior"));
    }
    Ok(&(*prior).inner)
}

unsafe fn out_arg<'a, T>(name: &str, ptr: *mut T) -> Result<&'a mut T, Failure> {
    if ptr.is_null() {
        return Err(Failure::null(name));
    }
    Ok(&mut *ptr)
}

/// Pair up estimate / standard-error buffers into observations. Reports the
/// offending unit index when a pair is rejected.
unsafe fn observations_arg(
    x: *const f64,
    sigma: *const f64,
    len: usize,
) -> Result<Vec<Observation>, Failure> {
    let xs = slice_arg("x", x, len)?;
    let sigmas = slice_arg("sigma", sigma, len)?;
    xs.iter()
        .zip(sigmas)
        .enumerate()
        .map(|(i, (&x, &sigma))| {
            Observation::new(x, sigma)
                .map_err(|e| Failure::new(RpStatus::InvalidArgument, format!("unit {i}: {e}")))
        })
        .collect()
}

fn export_prior(prior: PriorSpec, out: &mut *mut RpPrior) -> Result<(), Failure> {
    prior.validate()?;
    *out = Box::into_raw(Box::new(RpPrior { inner: prior }));
    Ok(())
}

/// Parse a prior from its JSON encoding, e.g.
/// `{"family": "normal", "params": {"tau": 1.0}}` or
/// `{"family": "pareto", "params": {"min": 0.5, "shape": 2.0}}`.
///
/// On success writes a new handle to `out`; release it with
/// [`rp_prior_free`].
///
/// # Safety
/// `json` must point to a NUL-terminated string and `out` to a writable
/// `RpPrior*` slot.
#[no_mangle]
pub unsafe extern "C" fn rp_prior_from_json(
    json: *const c_char,
    out: *mut *mut RpPrior,
) -> RpStatus {
    boundary(|| {
        if json.is_null() {
            return Err(Failure::null("json"));
        }
        let out = out_arg("out", out)?;
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|_| Failure::new(RpStatus::Utf8, "prior JSON is not valid UTF-8"))?;
        let prior: PriorSpec = serde_json::from_str(text)
            .map_err(|e| Failure::new(RpStatus::InvalidData, format!("prior JSON: {e}")))?;
        export_prior(prior, out)
    })
}

/// Construct a centered normal prior with scale `tau > 0`.
///
/// # Safety
/// `out` must point to a writable `RpPrior*` slot.
#[no_mangle]
pub unsafe extern "C" fn rp_prior_normal(tau: f64, out: *mut *mut RpPrior) -> RpStatus {
    boundary(|| export_prior(PriorSpec::Normal { tau }, out_arg("out", out)?))
}

/// Construct an exponential prior with rate `lambda > 0`.
///
/// # Safety
/// `out` must point to a writable `RpPrior*` slot.
#[no_mangle]
pub unsafe extern "C" fn rp_prior_exponential(rate: f64, out: *mut *mut RpPrior) -> RpStatus {
    boundary(|| export_prior(PriorSpec::Exponential { rate }, out_arg("out", out)?))
}

/// Construct the improper flat-left exponential prior with rate
/// `lambda > 0` (constant shrinkage `lambda * sigma^2`; its posterior mean
/// is exact, not a first-order approximation).
///
/// # Safety
/// `out` must point to a writable `RpPrior*` slot.
#[no_mangle]
pub unsafe extern "C" fn rp_prior_improper_exponential(
    rate: f64,
    out: *mut *mut RpPrior,
) -> RpStatus {
    boundary(|| export_prior(PriorSpec::ImproperExponential { rate }, out_arg("out", out)?))
}

/// Construct a Pareto prior with minimum `min > 0` and tail index
/// `shape > 0`.
///
/// # Safety
/// `out` must point to a writable `RpPrior*` slot.
#[no_mangle]
pub unsafe extern "C" fn rp_prior_pareto(
    min: f64,
    shape: f64,
    out: *mut *mut RpPrior,
) -> RpStatus {
    boundary(|| export_prior(PriorSpec::Pareto { min, shape }, out_arg("out", out)?))
}

/// Construct a discrete prior from `len` support points and proportional
/// weights. Duplicated support points are merged and the weights are
/// normalized to sum to 1, so any positive weight vector is accepted.
///
/// # Safety
/// `support` and `weights` must point to `len` readable doubles each and
/// `out` to a writable `RpPrior*` slot.
#[no_mangle]
pub unsafe extern "C" fn rp_prior_discrete(
    support: *const f64,
    weights: *const f64,
    len: usize,
    out: *mut *mut RpPrior,
) -> RpStatus {
    boundary(|| {
        let out = out_arg("out", out)?;
        let support = slice_arg("support", support, len)?;
        let weights = slice_arg("weights", weights, len)?;
        let prior = PriorSpec::discrete(support.to_vec(), weights.to_vec())?;
        export_prior(prior, out)
    })
}

/// Serialize a prior back to its JSON encoding. The returned string must be
/// released with [`rp_string_free`].
///
/// # Safety
/// `prior` must be a live handle and `out_json` a writable `char*` slot.
#[no_mangle]
pub unsafe extern "C" fn rp_prior_to_json(
    prior: *const RpPrior,
    out_json: *mut *mut c_char,
) -> RpStatus {
    boundary(|| {
        let spec = prior_arg(prior)?;
        let out_json = out_arg("out_json", out_json)?;
        let text = serde_json::to_string(spec)
            .map_err(|e| Failure::new(RpStatus::InvalidData, format!("serialize prior: {e}")))?;
        let cstring = CString::new(text)
            .map_err(|_| Failure::new(RpStatus::InvalidData, "serialized JSON held a NUL byte"))?;
        *out_json = cstring.into_raw();
        Ok(())
    })
}

/// Family tag of a prior as a static NUL-terminated string: `"normal"`,
/// `"exponential"`, `"improper_exponential"`, `"pareto"`, or `"discrete"`.
/// Returns NULL if `prior` is NULL. The pointer is static; do not free it.
///
/// # Safety
/// `prior` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rp_prior_family(prior: *const RpPrior) -> *const c_char {
    if prior.is_null() {
        return std::ptr::null();
    }
    let name: &'static CStr = match (*prior).inner {
        PriorSpec::Normal { .. } => c"normal",
        PriorSpec::Exponential { .. } => c"exponential",
        PriorSpec::ImproperExponential { .. } => c"improper_exponential",
        PriorSpec::Pareto { .. } => c"pareto",
        PriorSpec::Discrete { .. } => c"discrete",
    };
    name.as_ptr()
}

/// Release a prior handle. NULL is a no-op.
///
/// # Safety
/// `prior` must be NULL or a handle returned by this library that has not
/// already been freed.
#[no_mangle]
pub unsafe extern "C" fn rp_prior_free(prior: *mut RpPrior) {
    if !prior.is_null() {
        drop(Box::from_raw(prior));
    }
}

/// Release a string returned through a `char**` out-parameter. NULL is a
/// no-op.
///
/// # Safety
/// `s` must be NULL or a string returned by this library that has not
/// already been freed.
#[no_mangle]
pub unsafe extern "C" fn rp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Exact posterior mean `E[theta | x, sigma]` of a unit's latent effect
/// under `prior`, for an estimate `x` with standard error `sigma >= 0`
/// (`sigma = 0` returns `x`).
///
/// # Safety
/// `prior` must be a live handle and `out` a writable double.
#[no_mangle]
pub unsafe extern "C" fn rp_posterior_mean(
    prior: *const RpPrior,
    x: f64,
    sigma: f64,
    out: *mut f64,
) -> RpStatus {
    boundary(|| {
        let spec = prior_arg(prior)?;
        let out = out_arg("out", out)?;
        *out = posterior_mean(spec, Observation::new(x, sigma)?)?;
        Ok(())
    })
}

/// First-order posterior-mean approximation `x - lambda(x) * sigma^2`,
/// where `lambda = -pi'/pi` is the prior's shrinkage rate. Not defined for
/// discrete priors.
///
/// # Safety
/// `prior` must be a live handle and `out` a writable double.
#[no_mangle]
pub unsafe extern "C" fn rp_posterior_mean_approx(
    prior: *const RpPrior,
    x: f64,
    sigma: f64,
    out: *mut f64,
) -> RpStatus {
    boundary(|| {
        let spec = prior_arg(prior)?;
        let out = out_arg("out", out)?;
        *out = posterior_mean_approx(spec, Observation::new(x, sigma)?)?;
        Ok(())
    })
}

/// Rank `n` units by posterior mean, best first, ties broken by ascending
/// unit index. Writes the unit indices (a permutation of `0..n`) to
/// `out_order` and, when `out_scores` is non-null, the aligned
/// non-increasing scores to `out_scores`. Both buffers must hold `n`
/// entries. Ranking zero units is rejected as an invalid argument.
///
/// # Safety
/// `x` and `sigma` must point to `n` readable doubles, `out_order` to `n`
/// writable `size_t`, and `out_scores` to NULL or `n` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rp_rank(
    prior: *const RpPrior,
    x: *const f64,
    sigma: *const f64,
    n: usize,
    out_order: *mut usize,
    out_scores: *mut f64,
) -> RpStatus {
    boundary(|| {
        let spec = prior_arg(prior)?;
        let units = observations_arg(x, sigma, n)?;
        if n > 0 && out_order.is_null() {
            return Err(Failure::null("out_order"));
        }
        let ranking = rank_units(spec, &units)?;
        for (k, &unit) in ranking.order.iter().enumerate() {
            *out_order.add(k) = unit;
        }
        if !out_scores.is_null() {
            for (k, &score) in ranking.scores.iter().enumerate() {
                *out_scores.add(k) = score;
            }
        }
        Ok(())
    })
}

/// Fit the nonparametric maximum-likelihood prior (a discrete distribution)
/// to `n` estimate / standard-error pairs with the EM algorithm. `options`
/// may be NULL for the library defaults; `out_report` may be NULL when the
/// diagnostics are not wanted. A fit that stops at the iteration cap still
/// succeeds, with `converged = false` in the report.
///
/// # Safety
/// `x` and `sigma` must point to `n` readable doubles, `options` to NULL or
/// a readable `RpNpmleOptions`, `out_prior` to a writable `RpPrior*` slot,
/// and `out_report` to NULL or a writable `RpNpmleReport`.
#[no_mangle]
pub unsafe extern "C" fn rp_fit_npmle(
    x: *const f64,
    sigma: *const f64,
    n: usize,
    options: *const RpNpmleOptions,
    out_prior: *mut *mut RpPrior,
    out_report: *mut RpNpmleReport,
) -> RpStatus {
    boundary(|| {
        let units = observations_arg(x, sigma, n)?;
        let out_prior = out_arg("out_prior", out_prior)?;
        let config = if options.is_null() {
            NpmleConfig::default()
        } else {
            let opts = &*options;
            NpmleConfig {
                grid_size: opts.grid_size,
                max_iterations: opts.max_iterations,
                loglik_tolerance: opts.loglik_tolerance,
                weight_prune_threshold: opts.weight_prune_threshold,
            }
        };
        let fit = fit_npmle(&units, &config)?;
        if !out_report.is_null() {
            *out_report = RpNpmleReport {
                log_likelihood: fit.log_likelihood,
                max_gradient_ratio: fit.max_gradient_ratio,
                iterations: fit.iterations,
                converged: fit.converged,
            };
        }
        export_prior(fit.prior, out_prior)
    })
}

/// Fit a single tail hyperparameter by truncated maximum likelihood from
/// the units whose estimate exceeds `cutoff` strictly (at least two must).
/// The fitted parameter is the normal scale `tau`, the exponential rate
/// `lambda`, or the Pareto index `alpha` according to `family`; the Pareto
/// fit additionally requires `cutoff > 0`.
///
/// # Safety
/// `x` and `sigma` must point to `n` readable doubles and `out_param` to a
/// writable double.
#[no_mangle]
pub unsafe extern "C" fn rp_fit_tail(
    x: *const f64,
    sigma: *const f64,
    n: usize,
    cutoff: f64,
    family: RpTailFamily,
    out_param: *mut f64,
) -> RpStatus {
    boundary(|| {
        let units = observations_arg(x, sigma, n)?;
        let out_param = out_arg("out_param", out_param)?;
        let sample = TailSample::from_threshold(&units, cutoff)?;
        *out_param = match family {
            RpTailFamily::Normal => fit_tail_normal(&sample)?,
            RpTailFamily::Exponential => fit_tail_exponential(&sample)?,
            RpTailFamily::Pareto => fit_tail_pareto(&sample)?,
        };
        Ok(())
    })
}

/// Solve the equal-score condition at one noise level: the estimate `x`
/// whose posterior mean equals `level` when the sampling variance is
/// `variance`. This is one point of the prior's equal-score curve; pairs
/// `(x, variance)` computed over a variance grid trace the whole curve.
/// Fails with [`RpStatus::Domain`] when no estimate reaches the level at
/// that noise (e.g. a level above every reachable score).
///
/// # Safety
/// `prior` must be a live handle and `out_x` a writable double.
#[no_mangle]
pub unsafe extern "C" fn rp_isotaxis_x(
    prior: *const RpPrior,
    level: f64,
    variance: f64,
    out_x: *mut f64,
) -> RpStatus {
    boundary(|| {
        let spec = prior_arg(prior)?;
        let out_x = out_arg("out_x", out_x)?;
        let curve = isotaxis_curve(spec, level, &[variance])?;
        match curve.points.first() {
            Some(&(x, _)) => {
                *out_x = x;
                Ok(())
            }
            None => Err(Failure::new(
                RpStatus::Domain,
                format!("no estimate reaches score {level} at variance {variance}"),
            )),
        }
    })
}

/// Message for the most recent failing call on the calling thread, or ""
/// after a success. The pointer stays valid until this thread's next call
/// into the library; the library owns it — do not free it.
#[no_mangle]
pub extern "C" fn rp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string. Do not free it.
#[no_mangle]
pub extern "C" fn rp_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}
