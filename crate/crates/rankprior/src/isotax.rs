//! Equal-score curves in the `(x, variance)` plane.
//!
//! Ranking by posterior mean partitions the `(x, sigma^2)` plane into
//! regions of equal treatment: all observations on the curve
//! `E[theta | x, sigma] = C` receive the same score `C` and therefore the
//! same rank relative to any other unit. We call these curves *isotaxes*
//! ("equal rank"). Their shape makes the difference between naive and
//! shrinkage-based ranking visible at a glance:
//!
//! * **Normal prior** `N(0, tau^2)`: solving `x tau^2/(tau^2+v) = C` gives
//!   the line `x = C (tau^2 + v)/tau^2`. Every such line, whatever the
//!   level `C`, passes through the pivot point `(0, -tau^2)`.
//! * **Improper exponential prior** (constant shrinkage rate `lambda` on
//!   the whole line): the posterior mean is exactly `x - lambda v`, so the
//!   isotax is the line `x = C + lambda v` of slope `dv/dx = 1/lambda`.
//! * **Pareto prior** (shrinkage rate `(shape+1)/x`): inverting the
//!   first-order score `x - (shape+1) v / x = C` gives the parabola-like
//!   branch `x = C/2 + sqrt(C^2/4 + (shape+1) v)`. This closed form inverts
//!   the same first-order approximation [`posterior_mean_approx`] uses, and
//!   the quadrature-exact curve is available separately for verification.
//! * **Any other prior** (proper exponential, discrete), and every family
//!   in [`isotaxis_curve_exact`]: the `x` solving
//!   `posterior_mean(x, sqrt(v)) = C` is found by bisection, which is safe
//!   because the posterior mean is non-decreasing in `x` for every prior.
//!
//! The reference curve `x = z sigma` of constant two-sided significance is
//! provided for comparison: it grows like `sqrt(v)` where shrinkage-based
//! thresholds grow linearly in `v`, which is exactly why the two rules
//! disagree about noisy units.
//!
//! [`posterior_mean_approx`]: crate::posterior::posterior_mean_approx

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{normal, solve};
use crate::posterior::{posterior_mean, rank_units};
use crate::prior::{Observation, PriorSpec};

/// Absolute-ish tolerance on `x` for the bisection path (the solver treats
/// it as relative to `max(|x|, 1)`).
const ROOT_X_TOL: f64 = 1e-12;

/// Maximum doublings when expanding a bracket around the level `C`. The
/// bracket grows geometrically from one noise standard deviation, so 60
/// doublings cover every representable crossing.
const BRACKET_DOUBLINGS: usize = 60;

/// A single equal-score curve: the set of `(x, variance)` points whose
/// posterior mean equals `level`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsotaxisCurve {
    /// The common posterior-mean score `C` along the curve.
    pub level: f64,
    /// Curve points as `(x, variance)` pairs, in the order of the input
    /// variance grid (grid entries whose solve failed are omitted).
    pub points: Vec<(f64, f64)>,
    /// When the level came from a dataset rank threshold: the top fraction
    /// (e.g. `0.01` for the top 1%) the curve separates.
    pub rank_fraction: Option<f64>,
    /// Number of grid variances omitted because no `x` solves
    /// `posterior_mean(x, sqrt(v)) = level` (level outside the score range
    /// reachable at that noise level).
    pub skipped_points: usize,
}

impl IsotaxisCurve {
    /// The same curve with points as `(x, sigma)` instead of
    /// `(x, variance)`, for plotting against a standard-error axis.
    #[must_use]
    pub fn points_sigma_space(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(|&(x, v)| (x, v.sqrt())).collect()
    }

    /// Tag the curve with the top fraction its level was derived from.
    #[must_use]
    pub fn with_rank_fraction(mut self, alpha: f64) -> Self {
        self.rank_fraction = Some(alpha);
        self
    }
}

/// Equal-score curve at level `C` over `variance_grid`, using the family's
/// closed form where one exists.
///
/// Normal and improper-exponential curves are exact; the Pareto curve
/// inverts the first-order score `x - (shape+1) v / x` (use
/// [`isotaxis_curve_exact`] for the quadrature-exact version). Proper
/// exponential and discrete priors have no closed form and are solved
/// exactly. A grid entry where the solve fails (no `x` reaches the level)
/// is omitted and counted in `skipped_points`.
///
/// Errors on an invalid prior, non-finite `C`, a negative or non-finite
/// grid variance, or a non-positive `C` for families whose scores are
/// always positive (exponential on `[0, inf)`, Pareto).
pub fn isotaxis_curve(
    prior: &PriorSpec,
    level: f64,
    variance_grid: &[f64],
) -> Result<IsotaxisCurve> {
    validate_curve_inputs(prior, level, variance_grid)?;
    let mut points = Vec::with_capacity(variance_grid.len());
    let mut skipped = 0usize;
    for &v in variance_grid {
        let solved = if v == 0.0 {
            // Zero noise means zero shrinkage: the score is x itself.
            Ok(level)
        } else {
            match prior {
                PriorSpec::Normal { tau } => {
                    let t2 = tau * tau;
                    Ok(level * (t2 + v) / t2)
                }
                PriorSpec::ImproperExponential { rate } => Ok(level + rate * v),
                PriorSpec::Pareto { shape, .. } => {
                    let k = (shape + 1.0) * v;
                    Ok(level / 2.0 + (level * level / 4.0 + k).sqrt())
                }
                PriorSpec::Exponential { .. } | PriorSpec::Discrete { .. } => {
                    solve_level_crossing(prior, level, v)
                }
            }
        };
        match solved {
            Ok(x) => points.push((x, v)),
            Err(_) => skipped += 1,
        }
    }
    Ok(IsotaxisCurve { level, points, rank_fraction: None, skipped_points: skipped })
}

/// Equal-score curve at level `C`, solving `posterior_mean(x, sqrt(v)) = C`
/// exactly for every prior family (bisection to `x` tolerance `1e-12`).
///
/// Slower than [`isotaxis_curve`] but free of the Pareto first-order
/// approximation; used to verify the closed forms and for priors fitted
/// nonparametrically. Validation and skip behavior match
/// [`isotaxis_curve`].
pub fn isotaxis_curve_exact(
    prior: &PriorSpec,
    level: f64,
    variance_grid: &[f64],
) -> Result<IsotaxisCurve> {
    validate_curve_inputs(prior, level, variance_grid)?;
    let mut points = Vec::with_capacity(variance_grid.len());
    let mut skipped = 0usize;
    for &v in variance_grid {
        let solved = if v == 0.0 { Ok(level) } else { solve_level_crossing(prior, level, v) };
        match solved {
            Ok(x) => points.push((x, v)),
            Err(_) => skipped += 1,
        }
    }
    Ok(IsotaxisCurve { level, points, rank_fraction: None, skipped_points: skipped })
}

/// The score separating the top `alpha` fraction of a dataset: the
/// posterior mean of the unit at rank `ceil(alpha * n)` under `prior`.
///
/// Feeding the returned level to [`isotaxis_curve`] draws the decision
/// boundary that the top-`alpha` selection applied to this dataset. With
/// distinct scores, exactly `ceil(alpha * n)` units score at or above the
/// returned value.
///
/// Errors if `alpha` is outside `(0, 1)`, the observation list is empty,
/// or any unit's posterior mean fails.
pub fn rank_threshold(prior: &PriorSpec, obs: &[Observation], alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!(
            "rank fraction must lie strictly between 0 and 1, got {alpha}"
        )));
    }
    let ranked = rank_units(prior, obs)?;
    let n = ranked.len();
    // alpha in (0, 1) and n >= 1 make 1 <= ceil(alpha n) <= n.
    let k = (alpha * n as f64).ceil() as usize;
    Ok(ranked.scores[k.clamp(1, n) - 1])
}

/// Convenience for the dataset pipeline: the isotaxis of the top-`alpha`
/// threshold of `obs` under `prior`, tagged with the fraction.
pub fn top_fraction_curve(
    prior: &PriorSpec,
    obs: &[Observation],
    alpha: f64,
    variance_grid: &[f64],
) -> Result<IsotaxisCurve> {
    let level = rank_threshold(prior, obs, alpha)?;
    Ok(isotaxis_curve(prior, level, variance_grid)?.with_rank_fraction(alpha))
}

/// The constant two-sided-significance reference curve: `(x, variance)`
/// points with `x = z * sqrt(variance)`, `z` the standard-normal two-sided
/// quantile of `level` (1.959964 at level 0.95).
///
/// Errors if `level` is outside `(0, 1)` or a grid variance is negative or
/// non-finite.
pub fn significance_curve(variance_grid: &[f64], level: f64) -> Result<Vec<(f64, f64)>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(format!(
            "significance level must lie strictly between 0 and 1, got {level}"
        )));
    }
    validate_grid(variance_grid)?;
    let z = normal::quantile((1.0 + level) / 2.0)?;
    Ok(variance_grid.iter().map(|&v| (z * v.sqrt(), v)).collect())
}

/// Shared validation for the curve constructors.
fn validate_curve_inputs(prior: &PriorSpec, level: f64, variance_grid: &[f64]) -> Result<()> {
    prior.validate()?;
    if !level.is_finite() {
        return Err(Error::invalid(format!("curve level must be finite, got {level}")));
    }
    match prior {
        PriorSpec::Exponential { .. } | PriorSpec::Pareto { .. } if level <= 0.0 => {
            return Err(Error::invalid(format!(
                "curve level must be positive for the {} prior (its scores are), got {level}",
                prior.family()
            )));
        }
        _ => {}
    }
    validate_grid(variance_grid)
}

fn validate_grid(variance_grid: &[f64]) -> Result<()> {
    for &v in variance_grid {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::invalid(format!(
                "grid variances must be finite and >= 0, got {v}"
            )));
        }
    }
    Ok(())
}

/// Solve `posterior_mean(x, sqrt(v)) = level` for `x` at one positive
/// variance.
///
/// The posterior mean is non-decreasing in `x` (its derivative is the
/// posterior variance over `v`), so a sign-changing bracket around the
/// crossing pins the root. The bracket expands geometrically from the
/// level itself in steps starting at one noise standard deviation; if no
/// sign change appears the level is outside the reachable score range
/// (e.g. beyond a discrete prior's last atom) and the point is reported
/// as unsolvable.
fn solve_level_crossing(prior: &PriorSpec, level: f64, v: f64) -> Result<f64> {
    let sigma = v.sqrt();
    let f = |x: f64| match posterior_mean(prior, Observation { x, sigma }) {
        Ok(m) => m - level,
        Err(_) => f64::NAN,
    };
    let f0 = f(level);
    if f0.is_nan() {
        return Err(Error::Numerical(format!(
            "posterior mean failed at x = {level}, sigma = {sigma}"
        )));
    }
    if f0 == 0.0 {
        return Ok(level);
    }
    // Walk away from the level on the deficient side until the score
    // crosses it.
    let step0 = sigma.max(1e-3 * level.abs().max(1.0));
    let (mut lo, mut hi) = (level, level);
    let (mut f_lo, mut f_hi) = (f0, f0);
    let mut step = step0;
    for _ in 0..BRACKET_DOUBLINGS {
        if f_lo > 0.0 {
            lo -= step;
            f_lo = f(lo);
        } else if f_hi < 0.0 {
            hi += step;
            f_hi = f(hi);
        } else {
            break;
        }
        if f_lo.is_nan() || f_hi.is_nan() {
            return Err(Error::Numerical(format!(
                "posterior mean failed while bracketing level {level} at sigma = {sigma}"
            )));
        }
        step *= 2.0;
    }
    if f_lo > 0.0 || f_hi < 0.0 {
        return Err(Error::Numerical(format!(
            "no observation value reaches score {level} at sigma = {sigma}"
        )));
    }
    Ok(solve::bisect(f, lo, hi, ROOT_X_TOL, 200)?.root)
}
