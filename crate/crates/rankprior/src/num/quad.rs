//! Globally adaptive Gauss-Kronrod quadrature.
//!
//! A 7-point Gauss rule embedded in a 15-point Kronrod rule gives both an
//! integral estimate and an error estimate per segment. Segments are kept in
//! a max-heap ordered by error; the worst segment is bisected until the
//! total error satisfies the requested tolerance. Semi-infinite integrals
//! over `[a, +inf)` are mapped to `(0, 1]` by `theta = a + t/(1-t)`, whose
//! Jacobian `1/(1-t)^2` is handled inside the transformed integrand.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Positive abscissae of the 15-point Kronrod rule on [-1, 1]
/// (node 0 listed first; negatives are symmetric).
const XGK: [f64; 8] = [
    0.0,
    0.207_784_955_007_898_467_600_689_403_773_24,
    0.405_845_151_377_397_166_906_606_412_076_96,
    0.586_087_235_467_691_130_294_144_838_258_73,
    0.741_531_185_599_394_439_863_864_773_280_79,
    0.864_864_423_359_769_072_789_712_788_640_93,
    0.949_107_912_342_758_524_526_189_684_047_85,
    0.991_455_371_120_812_639_206_854_697_526_33,
];

/// Kronrod weights matching [`XGK`].
const WGK: [f64; 8] = [
    0.209_482_141_084_727_828_012_999_174_891_71,
    0.204_432_940_075_298_892_414_161_999_234_65,
    0.190_350_578_064_785_409_913_256_402_421_01,
    0.169_004_726_639_267_902_826_583_426_598_55,
    0.140_653_259_715_525_918_745_189_590_510_24,
    0.104_790_010_322_250_183_839_876_322_541_52,
    0.063_092_092_629_978_553_290_700_663_189_2,
    0.022_935_322_010_529_224_963_732_008_058_97,
];

/// Weights of the embedded 7-point Gauss rule (nodes `XGK[0], XGK[2], XGK[4], XGK[6]`).
const WG: [f64; 4] = [
    0.417_959_183_673_469_387_755_102_040_816_33,
    0.381_830_050_505_118_944_950_369_775_488_98,
    0.279_705_391_489_276_667_901_467_771_423_78,
    0.129_484_966_168_869_693_270_611_432_679_08,
];

/// Tolerances and budgets for adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct QuadConfig {
    /// Relative tolerance on the total integral.
    pub rel_tol: f64,
    /// Absolute tolerance floor (protects integrals whose value is near zero).
    pub abs_tol: f64,
    /// Maximum number of segment bisections before giving up.
    pub max_splits: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        // 1e-9 relative matches the accuracy contract of the posterior-mean
        // and loss-integral routines built on top of this module.
        QuadConfig { rel_tol: 1e-9, abs_tol: 1e-300, max_splits: 2000 }
    }
}

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    /// Integral estimate.
    pub value: f64,
    /// Estimated absolute error.
    pub abs_error: f64,
    /// Number of integrand evaluations.
    pub evaluations: usize,
    /// Whether the error estimate met the requested tolerance.
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        // Max-heap by error estimate; errors are finite by construction.
        self.error.total_cmp(&other.error)
    }
}

/// One G7-K15 evaluation over `[lo, hi]`.
fn kronrod_segment<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Result<Segment> {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);

    let mut kronrod = 0.0;
    let mut gauss = 0.0;
    let mut f_abs = 0.0;

    let fc = eval_checked(f, center)?;
    kronrod += WGK[0] * fc;
    gauss += WG[0] * fc;
    f_abs += WGK[0] * fc.abs();

    for k in 1..8 {
        let off = half * XGK[k];
        let f1 = eval_checked(f, center - off)?;
        let f2 = eval_checked(f, center + off)?;
        kronrod += WGK[k] * (f1 + f2);
        f_abs += WGK[k] * (f1.abs() + f2.abs());
        if k % 2 == 0 {
            gauss += WG[k / 2] * (f1 + f2);
        }
    }

    let value = kronrod * half;
    let raw_err = ((kronrod - gauss) * half).abs();
    // QUADPACK-style error rescaling: sharpen the raw |K15 - G7| estimate
    // when the integrand is smooth, floor it near machine precision.
    let resabs = f_abs * half.abs();
    let scaled = if raw_err > 0.0 && resabs > 0.0 {
        resabs * 1.0_f64.min((200.0 * raw_err / resabs).powf(1.5))
    } else {
        raw_err
    };
    // Never claim better than ~50 ulp of the magnitude actually summed.
    let error = scaled.max(50.0 * f64::EPSILON * resabs);

    Ok(Segment { lo, hi, value, error })
}

fn eval_checked<F: Fn(f64) -> f64>(f: &F, x: f64) -> Result<f64> {
    let y = f(x);
    if y.is_nan() {
        return Err(Error::Numerical(format!("integrand returned NaN at x = {x}")));
    }
    // +-inf from harmless overflow is treated as a hard failure too: the
    // quadrature sum would be meaningless.
    if y.is_infinite() {
        return Err(Error::Numerical(format!("integrand returned an infinity at x = {x}")));
    }
    Ok(y)
}

/// Integrate `f` over the finite interval `[lo, hi]`.
///
/// Returns a non-converged result (rather than an error) when the split
/// budget is exhausted, so callers can decide whether the achieved accuracy
/// is acceptable; NaN/inf integrand values are hard errors.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, cfg: &QuadConfig) -> Result<QuadResult> {
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::invalid("integrate requires finite endpoints"));
    }
    if lo >= hi {
        return Ok(QuadResult { value: 0.0, abs_error: 0.0, evaluations: 0, converged: true });
    }

    let mut heap = BinaryHeap::new();
    let first = kronrod_segment(&f, lo, hi)?;
    let mut total_value = first.value;
    let mut total_error = first.error;
    let mut evaluations = 15usize;
    heap.push(first);

    let mut splits = 0usize;
    while total_error > cfg.abs_tol.max(cfg.rel_tol * total_value.abs()) {
        if splits >= cfg.max_splits {
            return Ok(QuadResult {
                value: total_value,
                abs_error: total_error,
                evaluations,
                converged: false,
            });
        }
        let worst = heap.pop().expect("heap holds at least one segment");
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            // Interval too narrow to split further; accept its estimate.
            // Re-inserting with zero error keeps its value in the total.
            heap.push(Segment { error: 0.0, ..worst });
            total_error -= worst.error;
            splits += 1;
            continue;
        }
        let left = kronrod_segment(&f, worst.lo, mid)?;
        let right = kronrod_segment(&f, mid, worst.hi)?;
        evaluations += 30;
        total_value += left.value + right.value - worst.value;
        total_error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        splits += 1;
    }

    Ok(QuadResult { value: total_value, abs_error: total_error, evaluations, converged: true })
}

/// Integrate `f` over the semi-infinite interval `[lo, +inf)`.
///
/// Uses the substitution `theta = lo + t/(1-t)` with `t` in `(0, 1)`. The
/// integrand must decay fast enough for the transformed integrand to be
/// integrable; divergent tails show up as a non-converged result with a
/// large error estimate.
pub fn integrate_tail<F: Fn(f64) -> f64>(f: F, lo: f64, cfg: &QuadConfig) -> Result<QuadResult> {
    if !lo.is_finite() {
        return Err(Error::invalid("integrate_tail requires a finite lower endpoint"));
    }
    let g = |t: f64| {
        let one_minus = 1.0 - t;
        let theta = lo + t / one_minus;
        if !theta.is_finite() {
            return 0.0;
        }
        let jac = 1.0 / (one_minus * one_minus);
        let v = f(theta) * jac;
        // Decaying integrands can hit 0 * inf = NaN at the far edge; the
        // limit there is zero whenever the original integral exists.
        if v.is_nan() && t > 0.999 {
            0.0
        } else {
            v
        }
    };
    integrate(g, 0.0, 1.0, cfg)
}
