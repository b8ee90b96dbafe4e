//! Safeguarded scalar root finding and bracketing utilities.

use crate::error::{Error, Result};

/// Outcome of a root search.
#[derive(Debug, Clone, Copy)]
pub struct RootResult {
    /// Final abscissa.
    pub root: f64,
    /// Iterations consumed.
    pub iterations: usize,
}

/// Find a root of `f` inside the bracket `[lo, hi]` (which must straddle a
/// sign change) by Newton steps safeguarded with bisection.
///
/// Each iteration proposes a Newton step from the current iterate using the
/// supplied derivative; if the step leaves the bracket, or the derivative is
/// unusable, the iteration falls back to bisecting the bracket, which keeps
/// the method globally convergent. Convergence is declared when the bracket
/// or the step is below `x_tol` (absolute, with a relative component).
pub fn newton_bracketed<F, D>(
    f: F,
    df: D,
    x0: f64,
    mut lo: f64,
    mut hi: f64,
    x_tol: f64,
    max_iter: usize,
) -> Result<RootResult>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(RootResult { root: lo, iterations: 0 });
    }
    if f_hi == 0.0 {
        return Ok(RootResult { root: hi, iterations: 0 });
    }
    if f_lo.is_nan() || f_hi.is_nan() {
        return Err(Error::Numerical("root bracket evaluates to NaN".into()));
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::Numerical(format!(
            "no sign change in root bracket [{lo}, {hi}] (f = {f_lo}, {f_hi})"
        )));
    }

    let mut x = x0.clamp(lo, hi);
    for it in 1..=max_iter {
        let fx = f(x);
        if fx == 0.0 {
            return Ok(RootResult { root: x, iterations: it });
        }
        if fx.is_nan() {
            return Err(Error::Numerical(format!("objective returned NaN at x = {x}")));
        }
        // Shrink the bracket around the sign change.
        if fx.signum() == f_lo.signum() {
            lo = x;
            f_lo = fx;
        } else {
            hi = x;
        }

        let d = df(x);
        let newton = x - fx / d;
        let next = if d.is_finite() && d != 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };

        let step = (next - x).abs();
        x = next;
        let scale = x.abs().max(1.0);
        if step <= x_tol * scale || (hi - lo) <= x_tol * scale {
            return Ok(RootResult { root: x, iterations: it });
        }
    }
    Err(Error::Numerical(format!(
        "root iteration did not converge within {max_iter} iterations (bracket [{lo}, {hi}])"
    )))
}

/// Plain bisection on `[lo, hi]`; requires a sign change.
pub fn bisect<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    x_tol: f64,
    max_iter: usize,
) -> Result<RootResult> {
    newton_bracketed(&f, |_| f64::NAN, 0.5 * (lo + hi), lo, hi, x_tol, max_iter)
}

/// Expand `hi` geometrically (doubling the width) until `f(hi)` has the
/// opposite sign of `f(lo)`, up to `max_doublings`.
///
/// Returns the final upper endpoint. Used to build brackets for monotone
/// score functions whose crossing location is not known a priori.
pub fn expand_upper<F: Fn(f64) -> f64>(
    f: &F,
    lo: f64,
    hi0: f64,
    max_doublings: usize,
) -> Result<f64> {
    let f_lo = f(lo);
    if f_lo.is_nan() {
        return Err(Error::Numerical("bracket expansion: f(lo) is NaN".into()));
    }
    let mut hi = hi0.max(lo + f64::MIN_POSITIVE);
    for _ in 0..max_doublings {
        let f_hi = f(hi);
        if f_hi.is_nan() {
            return Err(Error::Numerical("bracket expansion: f(hi) is NaN".into()));
        }
        if f_hi.signum() != f_lo.signum() || f_hi == 0.0 {
            return Ok(hi);
        }
        hi = lo + 2.0 * (hi - lo);
    }
    Err(Error::Numerical(format!(
        "could not bracket a sign change starting from [{lo}, {hi0}]"
    )))
}

/// Golden-section minimizer on `[lo, hi]` for a unimodal objective.
///
/// Used as an independent cross-check of closed-form optima; accuracy is
/// driven to `x_tol` on the abscissa.
pub fn golden_min<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, x_tol: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    while (hi - lo).abs() > x_tol {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}
