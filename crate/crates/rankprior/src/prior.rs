//! Prior families over unit-level effects, and the observation type.
//!
//! A prior here is a distribution on the latent effect `theta` of a unit.
//! Five families are supported:
//!
//! | family                 | density `pi(theta)`                         | support      |
//! |------------------------|---------------------------------------------|--------------|
//! | `normal`               | `N(0, tau^2)`                               | all reals    |
//! | `exponential`          | `rate * exp(-rate * theta)`                 | `[0, inf)`   |
//! | `improper_exponential` | `exp(-rate * theta)` (not normalizable)     | all reals    |
//! | `pareto`               | `shape * min^shape / theta^(shape+1)`       | `[min, inf)` |
//! | `discrete`             | point masses `w_i` at `support_i`           | finite set   |
//!
//! The *shrinkage rate* `lambda(theta) = -pi'(theta) / pi(theta)` governs the
//! first-order posterior-mean approximation `x - lambda(x) sigma^2`: it is
//! `theta / tau^2` for the normal family, the constant `rate` for both
//! exponential forms, and `(shape + 1) / theta` for the Pareto family.
//!
//! The improper exponential prior is the one family whose posterior under
//! Gaussian noise is available in closed form for *every* `x`: the posterior
//! is exactly `Normal(x - rate * sigma^2, sigma^2)`. It cannot be sampled or
//! inverted (no normalizable CDF), and those operations return
//! [`Error::Unsupported`].
//!
//! # JSON schema
//!
//! Priors serialize as `{"family": "<name>", "params": {...}}`:
//!
//! ```json
//! {"family": "normal", "params": {"tau": 1.0}}
//! {"family": "exponential", "params": {"rate": 1.0}}
//! {"family": "improper_exponential", "params": {"rate": 1.0}}
//! {"family": "pareto", "params": {"min": 0.5, "shape": 2.0}}
//! {"family": "discrete", "params": {"support": [0.0, 1.5], "weights": [0.25, 0.75]}}
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::normal;
use crate::rng::open_unit;

/// A single unit's observed estimate and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// Observed estimate `x`, modeled as `Normal(theta, sigma^2)`.
    pub x: f64,
    /// Standard error `sigma >= 0` of the estimate.
    pub sigma: f64,
}

impl Observation {
    /// Construct an observation, validating finiteness and `sigma >= 0`.
    pub fn new(x: f64, sigma: f64) -> Result<Self> {
        if !x.is_finite() {
            return Err(Error::invalid(format!("observation estimate must be finite, got {x}")));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!(
                "observation standard error must be finite and >= 0, got {sigma}"
            )));
        }
        Ok(Observation { x, sigma })
    }
}

/// A prior distribution over unit-level effects.
///
/// Invalid parameter combinations are representable (the type derives
/// `Deserialize`), so every operation begins by calling [`PriorSpec::validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorSpec {
    /// Centered normal prior `N(0, tau^2)`.
    Normal {
        /// Standard deviation `tau > 0`.
        tau: f64,
    },
    /// Exponential prior with density `rate * exp(-rate * theta)` on `[0, inf)`.
    Exponential {
        /// Rate parameter `> 0`.
        rate: f64,
    },
    /// Improper prior with unnormalized density `exp(-rate * theta)` on the
    /// whole real line.
    ImproperExponential {
        /// Rate parameter `> 0`.
        rate: f64,
    },
    /// Pareto prior with density `shape * min^shape / theta^(shape+1)` on
    /// `[min, inf)`.
    Pareto {
        /// Lower endpoint of the support, `> 0`.
        min: f64,
        /// Tail index `shape > 0`; smaller values mean heavier tails.
        shape: f64,
    },
    /// Finitely supported prior with the given atoms and weights.
    ///
    /// The support must be sorted strictly ascending and the weights must be
    /// a probability vector (non-negative, summing to 1 within
    /// [`WEIGHT_SUM_TOL`]). Use [`PriorSpec::discrete`] to build one from
    /// unsorted atoms or proportional weights.
    Discrete {
        /// Atom locations (finite, non-empty, strictly ascending).
        support: Vec<f64>,
        /// Atom probabilities, aligned with `support`.
        weights: Vec<f64>,
    },
}

/// Tolerance on `|sum(weights) - 1|` for discrete priors.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

impl PriorSpec {
    /// Build a discrete prior from possibly unsorted atoms and proportional
    /// weights: atoms are sorted, exact duplicates merged (weights added),
    /// and weights normalized to sum to 1.
    pub fn discrete(support: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if support.len() != weights.len() {
            return Err(Error::invalid(format!(
                "discrete prior has {} support points but {} weights",
                support.len(),
                weights.len()
            )));
        }
        if support.is_empty() {
            return Err(Error::invalid("discrete prior requires a non-empty support"));
        }
        if support.iter().any(|b| !b.is_finite()) {
            return Err(Error::invalid("discrete prior support must be finite"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid("discrete prior weights must be finite and >= 0"));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::invalid("discrete prior weights must have a positive sum"));
        }
        let mut idx: Vec<usize> = (0..support.len()).collect();
        idx.sort_by(|&i, &j| support[i].total_cmp(&support[j]));
        let mut atoms: Vec<f64> = Vec::with_capacity(support.len());
        let mut probs: Vec<f64> = Vec::with_capacity(support.len());
        for &i in &idx {
            if atoms.last() == Some(&support[i]) {
                *probs.last_mut().expect("non-empty") += weights[i] / total;
            } else {
                atoms.push(support[i]);
                probs.push(weights[i] / total);
            }
        }
        // Guard against accumulated rounding pushing the sum outside the
        // validation tolerance.
        let sum: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= sum;
        }
        let prior = PriorSpec::Discrete { support: atoms, weights: probs };
        prior.validate()?;
        Ok(prior)
    }

    /// Human-readable family name (matches the JSON tag).
    #[must_use]
    pub fn family(&self) -> &'static str {
        match self {
            PriorSpec::Normal { .. } => "normal",
            PriorSpec::Exponential { .. } => "exponential",
            PriorSpec::ImproperExponential { .. } => "improper_exponential",
            PriorSpec::Pareto { .. } => "pareto",
            PriorSpec::Discrete { .. } => "discrete",
        }
    }

    /// Check parameter validity; every public operation calls this first.
    pub fn validate(&self) -> Result<()> {
        match self {
            PriorSpec::Normal { tau } => {
                if !(tau.is_finite() && *tau > 0.0) {
                    return Err(Error::invalid(format!("normal prior requires tau > 0, got {tau}")));
                }
            }
            PriorSpec::Exponential { rate } | PriorSpec::ImproperExponential { rate } => {
                if !(rate.is_finite() && *rate > 0.0) {
                    return Err(Error::invalid(format!(
                        "exponential prior requires rate > 0, got {rate}"
                    )));
                }
            }
            PriorSpec::Pareto { min, shape } => {
                if !(min.is_finite() && *min > 0.0) {
                    return Err(Error::invalid(format!("pareto prior requires min > 0, got {min}")));
                }
                if !(shape.is_finite() && *shape > 0.0) {
                    return Err(Error::invalid(format!(
                        "pareto prior requires shape > 0, got {shape}"
                    )));
                }
            }
            PriorSpec::Discrete { support, weights } => {
                if support.is_empty() {
                    return Err(Error::invalid("discrete prior requires a non-empty support"));
                }
                if support.len() != weights.len() {
                    return Err(Error::invalid(format!(
                        "discrete prior has {} support points but {} weights",
                        support.len(),
                        weights.len()
                    )));
                }
                if support.iter().any(|b| !b.is_finite()) {
                    return Err(Error::invalid("discrete prior support must be finite"));
                }
                if support.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::invalid(
                        "discrete prior support must be sorted strictly ascending (no duplicates)",
                    ));
                }
                if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                    return Err(Error::invalid("discrete prior weights must be finite and >= 0"));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > WEIGHT_SUM_TOL {
                    return Err(Error::invalid(format!(
                        "discrete prior weights must sum to 1 (got {total}); \
                         use PriorSpec::discrete to normalize proportional weights"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Whether the prior integrates to one.
    #[must_use]
    pub fn is_proper(&self) -> bool {
        !matches!(self, PriorSpec::ImproperExponential { .. })
    }

    /// Support of the prior as `(lower, upper)` (infinite endpoints allowed).
    #[must_use]
    pub fn support(&self) -> (f64, f64) {
        match self {
            PriorSpec::Normal { .. } | PriorSpec::ImproperExponential { .. } => {
                (f64::NEG_INFINITY, f64::INFINITY)
            }
            PriorSpec::Exponential { .. } => (0.0, f64::INFINITY),
            PriorSpec::Pareto { min, .. } => (*min, f64::INFINITY),
            PriorSpec::Discrete { support, .. } => {
                let lo = support.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = support.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            }
        }
    }

    /// Prior density `pi(theta)` (a probability mass for the discrete
    /// family, and the unnormalized `exp(-rate*theta)` for the improper one).
    ///
    /// Outside the support the density is zero. For the discrete family the
    /// mass is reported at exact (bitwise) support matches only; use the
    /// posterior-mean machinery rather than `density` for mixture work.
    pub fn density(&self, theta: f64) -> Result<f64> {
        self.validate()?;
        if !theta.is_finite() {
            return Err(Error::invalid(format!("density requires a finite point, got {theta}")));
        }
        Ok(match self {
            PriorSpec::Normal { tau } => normal::pdf(theta / tau) / tau,
            PriorSpec::Exponential { rate } => {
                if theta < 0.0 {
                    0.0
                } else {
                    rate * (-rate * theta).exp()
                }
            }
            PriorSpec::ImproperExponential { rate } => (-rate * theta).exp(),
            PriorSpec::Pareto { min, shape } => {
                if theta < *min {
                    0.0
                } else {
                    shape * min.powf(*shape) / theta.powf(shape + 1.0)
                }
            }
            PriorSpec::Discrete { support, weights } => support
                .iter()
                .position(|b| *b == theta)
                .map_or(0.0, |i| weights[i]),
        })
    }

    /// Natural log of [`PriorSpec::density`], computed directly so that far
    /// tails neither underflow nor overflow. Returns `-inf` outside the
    /// support. Not defined for the discrete family.
    pub fn log_density(&self, theta: f64) -> Result<f64> {
        self.validate()?;
        if !theta.is_finite() {
            return Err(Error::invalid(format!("log_density requires a finite point, got {theta}")));
        }
        match self {
            PriorSpec::Normal { tau } => {
                let z = theta / tau;
                Ok(-0.5 * z * z - tau.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln())
            }
            PriorSpec::Exponential { rate } => {
                if theta < 0.0 {
                    Ok(f64::NEG_INFINITY)
                } else {
                    Ok(rate.ln() - rate * theta)
                }
            }
            PriorSpec::ImproperExponential { rate } => Ok(-rate * theta),
            PriorSpec::Pareto { min, shape } => {
                if theta < *min {
                    Ok(f64::NEG_INFINITY)
                } else {
                    Ok(shape.ln() + shape * min.ln() - (shape + 1.0) * theta.ln())
                }
            }
            PriorSpec::Discrete { .. } => Err(Error::Unsupported {
                operation: "log_density",
                family: self.family(),
            }),
        }
    }

    /// Shrinkage rate `lambda(theta) = -pi'(theta)/pi(theta)`.
    ///
    /// Defined wherever the density is positive and differentiable:
    /// `theta / tau^2` (normal), `rate` (both exponential forms, the proper
    /// one only on its support), `(shape+1)/theta` (Pareto, on its support).
    /// The discrete family has no density and no shrinkage rate.
    pub fn shrinkage_rate(&self, theta: f64) -> Result<f64> {
        self.validate()?;
        if !theta.is_finite() {
            return Err(Error::invalid(format!(
                "shrinkage_rate requires a finite point, got {theta}"
            )));
        }
        match self {
            PriorSpec::Normal { tau } => Ok(theta / (tau * tau)),
            PriorSpec::Exponential { rate } => {
                if theta < 0.0 {
                    Err(Error::Domain(format!(
                        "shrinkage rate undefined at {theta}: exponential density is zero below 0"
                    )))
                } else {
                    Ok(*rate)
                }
            }
            PriorSpec::ImproperExponential { rate } => Ok(*rate),
            PriorSpec::Pareto { min, shape } => {
                if theta < *min {
                    Err(Error::Domain(format!(
                        "shrinkage rate undefined at {theta}: pareto density is zero below {min}"
                    )))
                } else {
                    Ok((shape + 1.0) / theta)
                }
            }
            PriorSpec::Discrete { .. } => Err(Error::Unsupported {
                operation: "shrinkage_rate",
                family: self.family(),
            }),
        }
    }

    /// Cumulative distribution function. Not defined for the improper family.
    pub fn cdf(&self, theta: f64) -> Result<f64> {
        self.validate()?;
        if theta.is_nan() {
            return Err(Error::invalid("cdf requires a non-NaN point"));
        }
        match self {
            PriorSpec::Normal { tau } => Ok(normal::cdf(theta / tau)),
            PriorSpec::Exponential { rate } => {
                Ok(if theta <= 0.0 { 0.0 } else { -(-rate * theta).exp_m1() })
            }
            PriorSpec::ImproperExponential { .. } => Err(Error::Unsupported {
                operation: "cdf",
                family: self.family(),
            }),
            PriorSpec::Pareto { min, shape } => {
                Ok(if theta <= *min { 0.0 } else { 1.0 - (min / theta).powf(*shape) })
            }
            PriorSpec::Discrete { support, weights } => Ok(support
                .iter()
                .zip(weights)
                .take_while(|(b, _)| **b <= theta)
                .map(|(_, w)| w)
                .sum()),
        }
    }

    /// Quantile function for `p` in the open interval (0, 1).
    ///
    /// For the continuous families this inverts the CDF exactly; for the
    /// discrete family it returns the generalized inverse (the smallest atom
    /// whose cumulative weight reaches `p`). Not defined for the improper
    /// family.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        self.validate()?;
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::invalid(format!(
                "quantile requires a probability in the open interval (0, 1), got {p}"
            )));
        }
        match self {
            PriorSpec::Normal { tau } => Ok(tau * normal::quantile(p)?),
            PriorSpec::Exponential { rate } => Ok(-(-p).ln_1p() / rate),
            PriorSpec::ImproperExponential { .. } => Err(Error::Unsupported {
                operation: "quantile",
                family: self.family(),
            }),
            PriorSpec::Pareto { min, shape } => Ok(min * (1.0 - p).powf(-1.0 / shape)),
            PriorSpec::Discrete { support, weights } => {
                // Generalized inverse: smallest atom whose cumulative weight
                // reaches p (support is validated ascending).
                let mut cum = 0.0;
                for (b, w) in support.iter().zip(weights) {
                    cum += w;
                    if cum >= p {
                        return Ok(*b);
                    }
                }
                // Rounding may leave cum marginally below 1; return the top atom.
                Ok(*support.last().expect("non-empty support"))
            }
        }
    }

    /// Draw `n` independent samples using inverse-CDF transforms of uniform
    /// variates from `rng`. Not defined for the improper family.
    pub fn sample(&self, n: usize, rng: &mut impl rand::Rng) -> Result<Vec<f64>> {
        self.validate()?;
        if let PriorSpec::ImproperExponential { .. } = self {
            return Err(Error::Unsupported { operation: "sample", family: self.family() });
        }
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(self.quantile(open_unit(rng))?);
        }
        Ok(out)
    }

    /// Draw `n` samples deterministically from a fresh stream keyed by `seed`.
    pub fn sample_seeded(&self, n: usize, seed: u64) -> Result<Vec<f64>> {
        let mut rng = crate::rng::stream_rng(seed, 0);
        self.sample(n, &mut rng)
    }

    /// Parse a prior from its JSON representation, validating parameters.
    pub fn from_json(json: &str) -> Result<Self> {
        let prior: PriorSpec = serde_json::from_str(json)?;
        prior.validate()?;
        Ok(prior)
    }

    /// Serialize to the stable JSON schema (single line).
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}
