//! The exponential integral `E1(x) = ∫_x^∞ e^{-t}/t dt` for `x > 0`.
//!
//! Needed for the closed-form tail moments `∫_a^∞ t^{-1} e^{-2λt} dt =
//! E1(2λa)` and its `t^{-2}` companion, which the loss-theory module uses to
//! expand misspecification integrals without numerical quadrature.
//!
//! Two classical regimes: a power series around 0 for `x <= 1`, and a
//! continued fraction (modified Lentz evaluation) for `x > 1`. Both deliver
//! close to machine precision; the crossover values agree to ~1e-15
//! relative.

use crate::error::{Error, Result};

/// Euler–Mascheroni constant.
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `E1(x)` for `x > 0`. Rejects `x <= 0` (the integral diverges at 0 and
/// the real-valued continuation is not needed here).
pub fn e1(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::invalid(format!("E1 requires x > 0, got {x}")));
    }
    if x > 700.0 {
        // e^{-x} underflows the result below ~1e-307; the integral is
        // smaller than e^{-x}/x. Return 0 rather than subnormal noise.
        return Ok(0.0);
    }
    if x <= 1.0 {
        // E1(x) = -gamma - ln x + sum_{k>=1} (-1)^{k+1} x^k / (k * k!).
        let mut sum = 0.0;
        let mut term = 1.0; // x^k / k! accumulator
        for k in 1..=40 {
            term *= x / f64::from(k);
            let contrib = if k % 2 == 1 { term } else { -term } / f64::from(k);
            sum += contrib;
            if contrib.abs() < 1e-18 * sum.abs().max(1.0) {
                break;
            }
        }
        Ok(-EULER_GAMMA - x.ln() + sum)
    } else {
        // E1(x) = e^{-x} * 1/(x+1- 1^2/(x+3- 2^2/(x+5- ...))), evaluated by
        // the modified Lentz algorithm.
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut f = d;
        for k in 1..200u32 {
            let a = -f64::from(k) * f64::from(k);
            b += 2.0;
            d = 1.0 / (a * d + b);
            c = b + a / c;
            let delta = c * d;
            f *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        Ok((-x).exp() * f)
    }
}
