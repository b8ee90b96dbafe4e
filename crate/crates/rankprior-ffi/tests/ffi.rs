//! Exercises the C ABI exactly as a foreign caller would: through the
//! `extern "C"` entry points, raw pointers, and status codes.

use std::ffi::{c_char, CStr, CString};
use std::ptr;

use rankprior_ffi::{
    rp_fit_npmle, rp_fit_tail, rp_isotaxis_x, rp_last_error_message, rp_posterior_mean,
    rp_posterior_mean_approx, rp_prior_discrete, rp_prior_family, rp_prior_free,
    rp_prior_from_json, rp_prior_normal, rp_prior_pareto, rp_prior_to_json, rp_rank,
    rp_string_free, rp_version, RpNpmleOptions, RpNpmleReport, RpPrior, RpStatus, RpTailFamily,
};

/// Build a prior handle from JSON or panic with the last error message.
unsafe fn prior_from(json: &str) -> *mut RpPrior {
    let json = CString::new(json).unwrap();
    let mut handle: *mut RpPrior = ptr::null_mut();
    let status = rp_prior_from_json(json.as_ptr(), &mut handle);
    assert_eq!(status, RpStatus::Ok, "{}", last_error());
    assert!(!handle.is_null());
    handle
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(rp_last_error_message()).to_str().unwrap().to_string() }
}

unsafe fn static_str(ptr: *const c_char) -> &'static str {
    CStr::from_ptr(ptr).to_str().unwrap()
}

#[test]
fn prior_json_round_trips_and_reports_family() {
    unsafe {
        let handle = prior_from(r#"{"family": "pareto", "params": {"min": 0.5, "shape": 2.0}}"#);
        assert_eq!(static_str(rp_prior_family(handle)), "pareto");

        let mut json: *mut c_char = ptr::null_mut();
        assert_eq!(rp_prior_to_json(handle, &mut json), RpStatus::Ok);
        let text = CStr::from_ptr(json).to_str().unwrap();
        let doc: serde_json::Value = serde_json::from_str(text).unwrap();
        assert_eq!(doc["family"], "pareto");
        assert_eq!(doc["params"]["min"], 0.5);
        assert_eq!(doc["params"]["shape"], 2.0);
        rp_string_free(json);
        rp_prior_free(handle);

        assert_eq!(rp_prior_family(ptr::null()), ptr::null());
    }
}

#[test]
fn constructors_validate_and_set_the_thread_error() {
    unsafe {
        let mut handle: *mut RpPrior = ptr::null_mut();
        assert_eq!(rp_prior_normal(-1.0, &mut handle), RpStatus::InvalidArgument);
        assert!(handle.is_null());
        assert!(last_error().contains("tau"), "{}", last_error());

        // A later success clears the message.
        assert_eq!(rp_prior_normal(1.0, &mut handle), RpStatus::Ok);
        assert_eq!(last_error(), "");
        rp_prior_free(handle);

        // Malformed and schema-violating JSON are data errors.
        let garbled = CString::new("{not json").unwrap();
        let mut h: *mut RpPrior = ptr::null_mut();
        assert_eq!(rp_prior_from_json(garbled.as_ptr(), &mut h), RpStatus::InvalidData);
        let unknown =
            CString::new(r#"{"family": "weibull", "params": {"k": 1.0}}"#).unwrap();
        assert_eq!(rp_prior_from_json(unknown.as_ptr(), &mut h), RpStatus::InvalidData);
        assert!(last_error().contains("weibull") || last_error().contains("unknown"));

        // Null arguments are reported as such.
        assert_eq!(rp_prior_from_json(ptr::null(), &mut h), RpStatus::NullArgument);
        let ok_json = CString::new(r#"{"family": "normal", "params": {"tau": 1.0}}"#).unwrap();
        assert_eq!(rp_prior_from_json(ok_json.as_ptr(), ptr::null_mut()), RpStatus::NullArgument);
    }
}

#[test]
fn posterior_means_match_the_core_library() {
    unsafe {
        let handle = prior_from(r#"{"family": "normal", "params": {"tau": 1.0}}"#);
        let spec = rankprior::PriorSpec::Normal { tau: 1.0 };
        for &(x, sigma) in &[(1.1, 0.05), (0.0, 1.0), (-2.4, 0.3), (3.0, 0.0)] {
            let mut got = f64::NAN;
            assert_eq!(rp_posterior_mean(handle, x, sigma, &mut got), RpStatus::Ok);
            let want = rankprior::posterior_mean(
                &spec,
                rankprior::Observation::new(x, sigma).unwrap(),
            )
            .unwrap();
            assert_eq!(got, want, "exact mean at x={x}, sigma={sigma}");

            let mut approx = f64::NAN;
            assert_eq!(rp_posterior_mean_approx(handle, x, sigma, &mut approx), RpStatus::Ok);
            // Normal shrinkage rate is x / tau^2.
            assert!((approx - (x - x * sigma * sigma)).abs() < 1e-15);
        }

        // Invalid sigma is rejected before any math runs.
        let mut got = f64::NAN;
        assert_eq!(rp_posterior_mean(handle, 1.0, -0.5, &mut got), RpStatus::InvalidArgument);
        assert_eq!(
            rp_posterior_mean(handle, 1.0, f64::INFINITY, &mut got),
            RpStatus::InvalidArgument
        );
        rp_prior_free(handle);

        // The approximation is undefined for a discrete prior.
        let support = [0.0, 1.0];
        let weights = [0.5, 0.5];
        let mut discrete: *mut RpPrior = ptr::null_mut();
        assert_eq!(
            rp_prior_discrete(support.as_ptr(), weights.as_ptr(), 2, &mut discrete),
            RpStatus::Ok
        );
        assert_eq!(
            rp_posterior_mean_approx(discrete, 0.5, 0.1, &mut got),
            RpStatus::Unsupported
        );
        // ... but the exact mean is defined.
        assert_eq!(rp_posterior_mean(discrete, 0.5, 0.1, &mut got), RpStatus::Ok);
        assert!((got - 0.5).abs() < 1e-12, "symmetry pins the mean at 0.5, got {got}");
        rp_prior_free(discrete);
    }
}

#[test]
fn ranking_matches_the_core_and_breaks_ties_stably() {
    unsafe {
        let handle = prior_from(r#"{"family": "normal", "params": {"tau": 1.0}}"#);
        let spec = rankprior::PriorSpec::Normal { tau: 1.0 };
        // Units 1 and 3 tie exactly; the smaller index must come first.
        let x = [0.4, 2.0, -1.0, 2.0, 1.5];
        let sigma = [0.1, 0.2, 0.3, 0.2, 0.05];
        let n = x.len();
        let mut order = vec![usize::MAX; n];
        let mut scores = vec![f64::NAN; n];
        assert_eq!(
            rp_rank(handle, x.as_ptr(), sigma.as_ptr(), n, order.as_mut_ptr(), scores.as_mut_ptr()),
            RpStatus::Ok,
            "{}",
            last_error()
        );

        let units: Vec<rankprior::Observation> = x
            .iter()
            .zip(&sigma)
            .map(|(&x, &s)| rankprior::Observation::new(x, s).unwrap())
            .collect();
        let want = rankprior::rank_units(&spec, &units).unwrap();
        assert_eq!(order, want.order);
        assert_eq!(scores, want.scores);
        let tie_a = order.iter().position(|&u| u == 1).unwrap();
        let tie_b = order.iter().position(|&u| u == 3).unwrap();
        assert!(tie_a < tie_b, "equal scores must keep ascending unit order");

        // Scores are optional; a null buffer skips them.
        let mut order_only = vec![usize::MAX; n];
        assert_eq!(
            rp_rank(handle, x.as_ptr(), sigma.as_ptr(), n, order_only.as_mut_ptr(), ptr::null_mut()),
            RpStatus::Ok
        );
        assert_eq!(order_only, want.order);

        // Ranking nothing is rejected (mirroring the core), and null
        // buffers with n = 0 must not be dereferenced on the way there.
        assert_eq!(
            rp_rank(handle, ptr::null(), ptr::null(), 0, ptr::null_mut(), ptr::null_mut()),
            RpStatus::InvalidArgument
        );
        assert!(last_error().contains("empty"), "{}", last_error());

        // A bad unit is named by index.
        let bad_sigma = [0.1, f64::NAN, 0.3, 0.2, 0.05];
        assert_eq!(
            rp_rank(handle, x.as_ptr(), bad_sigma.as_ptr(), n, order.as_mut_ptr(), ptr::null_mut()),
            RpStatus::InvalidArgument
        );
        assert!(last_error().starts_with("unit 1:"), "{}", last_error());
        rp_prior_free(handle);
    }
}

#[test]
fn tail_fits_match_the_core_library() {
    unsafe {
        // Exceedances 0.1, 0.9, 0.4, 2.0 over the cutoff, plus one unit
        // below the cutoff that from_threshold must drop.
        let a = std::f64::consts::LN_10;
        let x = [a + 0.1, a + 0.9, a - 0.5, a + 0.4, a + 2.0];
        let sigma = [0.1, 0.3, 0.2, 0.2, 0.15];
        let mut rate = f64::NAN;
        assert_eq!(
            rp_fit_tail(
                x.as_ptr(),
                sigma.as_ptr(),
                x.len(),
                a,
                RpTailFamily::Exponential,
                &mut rate
            ),
            RpStatus::Ok,
            "{}",
            last_error()
        );
        let want = 1.251_304_894_094_913_5;
        assert!(((rate - want) / want).abs() < 1e-12, "rate {rate} vs {want}");

        // Too few exceedances is an argument error, not a crash.
        let mut out = f64::NAN;
        assert_eq!(
            rp_fit_tail(x.as_ptr(), sigma.as_ptr(), x.len(), a + 1.5, RpTailFamily::Normal, &mut out),
            RpStatus::InvalidArgument
        );

        // The Pareto fit rejects a non-positive cutoff.
        let shifted = [-0.5, 0.4, 0.9, 1.2, 2.0];
        assert_eq!(
            rp_fit_tail(
                shifted.as_ptr(),
                sigma.as_ptr(),
                shifted.len(),
                -1.0,
                RpTailFamily::Pareto,
                &mut out
            ),
            RpStatus::InvalidArgument,
            "{}",
            last_error()
        );
    }
}

#[test]
fn npmle_fit_returns_a_discrete_prior_with_diagnostics() {
    unsafe {
        // Two tight clusters around -1 and 2.
        let mut x = Vec::new();
        let mut sigma = Vec::new();
        for i in 0..6 {
            x.push(-1.0 + 0.001 * f64::from(i));
            sigma.push(0.05);
            x.push(2.0 + 0.001 * f64::from(i));
            sigma.push(0.05);
        }
        let options = RpNpmleOptions {
            grid_size: 120,
            max_iterations: 4000,
            loglik_tolerance: 1e-10,
            weight_prune_threshold: 1e-12,
        };
        let mut handle: *mut RpPrior = ptr::null_mut();
        let mut report = RpNpmleReport {
            log_likelihood: f64::NAN,
            max_gradient_ratio: f64::NAN,
            iterations: 0,
            converged: false,
        };
        assert_eq!(
            rp_fit_npmle(x.as_ptr(), sigma.as_ptr(), x.len(), &options, &mut handle, &mut report),
            RpStatus::Ok,
            "{}",
            last_error()
        );
        assert_eq!(static_str(rp_prior_family(handle)), "discrete");
        assert!(report.log_likelihood.is_finite());
        assert!(report.iterations >= 1);

        // The FFI fit and its diagnostics are exactly the core library's.
        let units: Vec<rankprior::Observation> = x
            .iter()
            .zip(&sigma)
            .map(|(&x, &s)| rankprior::Observation::new(x, s).unwrap())
            .collect();
        let core = rankprior::fit_npmle(
            &units,
            &rankprior::NpmleConfig {
                grid_size: 120,
                max_iterations: 4000,
                loglik_tolerance: 1e-10,
                weight_prune_threshold: 1e-12,
            },
        )
        .unwrap();
        let mut json: *mut c_char = ptr::null_mut();
        assert_eq!(rp_prior_to_json(handle, &mut json), RpStatus::Ok);
        let got: serde_json::Value =
            serde_json::from_str(CStr::from_ptr(json).to_str().unwrap()).unwrap();
        let want = serde_json::to_value(&core.prior).unwrap();
        assert_eq!(got, want);
        assert_eq!(report.log_likelihood, core.log_likelihood);
        assert_eq!(report.max_gradient_ratio, core.max_gradient_ratio);
        assert_eq!(report.iterations, core.iterations);
        assert_eq!(report.converged, core.converged);
        rp_string_free(json);
        rp_prior_free(handle);

        // The report is optional.
        let mut quiet: *mut RpPrior = ptr::null_mut();
        assert_eq!(
            rp_fit_npmle(x.as_ptr(), sigma.as_ptr(), x.len(), &options, &mut quiet, ptr::null_mut()),
            RpStatus::Ok
        );
        rp_prior_free(quiet);
    }
}

#[test]
fn isotaxis_solves_levels_and_flags_unreachable_ones() {
    unsafe {
        // Normal prior: x = C (tau^2 + v) / tau^2 in closed form.
        let mut handle: *mut RpPrior = ptr::null_mut();
        assert_eq!(rp_prior_normal(0.8, &mut handle), RpStatus::Ok);
        let mut x = f64::NAN;
        assert_eq!(rp_isotaxis_x(handle, 0.25, 0.64, &mut x), RpStatus::Ok, "{}", last_error());
        assert!((x - 0.5).abs() < 1e-12, "closed form gives 0.5, got {x}");
        rp_prior_free(handle);

        // A discrete prior's scores live inside its support hull: a level
        // above the top atom is unreachable at positive noise.
        let support = [0.0, 1.0];
        let weights = [0.5, 0.5];
        let mut discrete: *mut RpPrior = ptr::null_mut();
        assert_eq!(
            rp_prior_discrete(support.as_ptr(), weights.as_ptr(), 2, &mut discrete),
            RpStatus::Ok
        );
        assert_eq!(rp_isotaxis_x(discrete, 2.0, 0.25, &mut x), RpStatus::Domain);
        assert!(last_error().contains("variance"), "{}", last_error());
        rp_prior_free(discrete);

        // Score levels a Pareto prior can never produce are rejected up
        // front as invalid arguments.
        let mut pareto: *mut RpPrior = ptr::null_mut();
        assert_eq!(rp_prior_pareto(0.5, 2.0, &mut pareto), RpStatus::Ok);
        assert_eq!(rp_isotaxis_x(pareto, -1.0, 0.25, &mut x), RpStatus::InvalidArgument);
        rp_prior_free(pareto);
    }
}

#[test]
fn version_string_matches_the_crate() {
    unsafe {
        assert_eq!(static_str(rp_version()), env!("CARGO_PKG_VERSION"));
    }
}
