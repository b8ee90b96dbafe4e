//! Reproducible simulation harness for ranking-loss studies.
//!
//! The study design: draw `n` latent effects `theta_i` from a *true prior*,
//! attach noise levels `sigma_i = offset + Exp(mean)` independent of the
//! effects, observe `x_i ~ Normal(theta_i, sigma_i^2)`, and rank the units
//! two ways — under the true prior (the reference) and under an *estimating*
//! prior from one of the parametric families. The reported loss is the
//! weighted top-decile gap between the two rankings
//! ([`weighted_top_decile_loss`]), averaged over replicates, with a Monte
//! Carlo standard error.
//!
//! Estimating-prior parameters come in two modes:
//!
//! * [`ParameterMode::Optimal`]: the loss-theory minimizer for the
//!   (true prior, family) pair at the true prior's 90th-percentile cutoff.
//!   When the estimating family contains the truth this is the true
//!   parameter itself and the estimating prior is the true prior, so the
//!   diagonal of a study table is exactly zero.
//! * [`ParameterMode::TailMle`]: refitted per replicate by truncated
//!   maximum likelihood on the observations above the same cutoff
//!   (see [`crate::tail`]), so parameter noise and bias flow into the loss.
//!
//! A point-estimate baseline column (rank by raw `x`) measures the overall
//! difficulty of each scenario.
//!
//! Reproducibility: all randomness is drawn from counter-based streams —
//! replicate `r` uses streams `3r` (effects), `3r + 1` (noise levels), and
//! `3r + 2` (observation noise) of the configured seed — so any cell,
//! replicate, or whole study can be regenerated bit-for-bit in isolation,
//! in parallel, and on any platform. Cells that share a seed, true prior,
//! and size analyse identical datasets, which is what makes columns of a
//! study table comparable.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{
    misspecification_integral_for_family, optimal_hyperparameter, weighted_top_decile_loss,
    ParametricFamily,
};
use crate::num::normal;
use crate::posterior::{rank_by_point_estimate, rank_units};
use crate::prior::{Observation, PriorSpec};
use crate::rng::{open_unit, stream_rng};
use crate::tail::{fit_tail_exponential, fit_tail_normal, fit_tail_pareto, TailSample};

/// Known lower endpoint for a Pareto estimating prior when the true prior
/// is not itself Pareto (when it is, its own endpoint is reused). Only the
/// shape is treated as unknown, so this constant plays the role of the
/// "known" secondary parameter.
pub const DEFAULT_PARETO_MIN: f64 = 0.5;

/// Quantile of the true prior at which tail fitting (and the optimal-
/// parameter integrals) truncate: ranking quality is a top-of-the-list
/// concern, so parameters are chosen to fit the top decile.
pub const TAIL_QUANTILE: f64 = 0.9;

/// How estimating-prior parameters are chosen in a simulation cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParameterMode {
    /// The loss-theory optimal parameter for the (true prior, family) pair.
    Optimal,
    /// Truncated maximum likelihood above the cutoff, refitted per replicate.
    TailMle,
}

impl ParameterMode {
    /// Stable label used in reports ("optimal" / "tail_mle").
    #[must_use]
    pub fn name(self) -> &'static str {
        match self {
            ParameterMode::Optimal => "optimal",
            ParameterMode::TailMle => "tail_mle",
        }
    }
}

/// Configuration of one simulation cell family (one true prior, one size).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    /// Distribution generating the latent effects. Must be proper (the
    /// improper exponential cannot be sampled).
    pub true_prior: PriorSpec,
    /// Units per simulated dataset.
    pub n: usize,
    /// Number of independent replicate datasets.
    pub replicates: usize,
    /// Mean of the exponential distribution of noise levels.
    pub sigma_mean: f64,
    /// Additive floor on every noise level (keeps quadrature away from the
    /// degenerate sigma = 0 limit).
    pub sigma_offset: f64,
    /// Root seed; combined with the replicate index for per-replicate
    /// streams.
    pub seed: u64,
    /// How estimating-prior parameters are chosen.
    pub parameter_mode: ParameterMode,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            true_prior: PriorSpec::Normal { tau: 1.0 },
            n: 1000,
            replicates: 200,
            sigma_mean: 0.02,
            sigma_offset: 1e-4,
            seed: 0,
            parameter_mode: ParameterMode::Optimal,
        }
    }
}

impl SimulationConfig {
    /// Check the documented invariants (proper prior, `n >= 10`,
    /// `replicates >= 1`, positive noise mean, non-negative offset).
    pub fn validate(&self) -> Result<()> {
        self.true_prior.validate()?;
        if !self.true_prior.is_proper() {
            return Err(Error::Unsupported {
                operation: "simulate_dataset",
                family: self.true_prior.family(),
            });
        }
        if self.n < 10 {
            return Err(Error::invalid(format!(
                "simulation needs at least 10 units per dataset, got {}",
                self.n
            )));
        }
        if self.replicates == 0 {
            return Err(Error::invalid("simulation needs at least one replicate"));
        }
        if !(self.sigma_mean.is_finite() && self.sigma_mean > 0.0) {
            return Err(Error::invalid(format!(
                "noise-level mean must be finite and > 0, got {}",
                self.sigma_mean
            )));
        }
        if !(self.sigma_offset.is_finite() && self.sigma_offset >= 0.0) {
            return Err(Error::invalid(format!(
                "noise-level offset must be finite and >= 0, got {}",
                self.sigma_offset
            )));
        }
        Ok(())
    }
}

/// One simulated dataset: the latent truth and what was observed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedDataset {
    /// Latent effects, aligned with `observations`.
    pub thetas: Vec<f64>,
    /// Noisy observations `x_i ~ Normal(theta_i, sigma_i^2)`.
    pub observations: Vec<Observation>,
}

/// Generate replicate `replicate_index` of the configured design,
/// bit-reproducibly.
///
/// Effects, noise levels, and observation noise come from three separate
/// counter-derived streams, so the noise levels are independent of the
/// effects by construction.
pub fn simulate_dataset(
    config: &SimulationConfig,
    replicate_index: usize,
) -> Result<SimulatedDataset> {
    config.validate()?;
    let r = replicate_index as u64;
    let mut theta_rng = stream_rng(config.seed, 3 * r);
    let mut sigma_rng = stream_rng(config.seed, 3 * r + 1);
    let mut noise_rng = stream_rng(config.seed, 3 * r + 2);
    let thetas = config.true_prior.sample(config.n, &mut theta_rng)?;
    let mut observations = Vec::with_capacity(config.n);
    for &theta in &thetas {
        let sigma = config.sigma_offset - config.sigma_mean * open_unit(&mut sigma_rng).ln();
        let z = normal::quantile(open_unit(&mut noise_rng))?;
        observations.push(Observation::new(theta + sigma * z, sigma)?);
    }
    Ok(SimulatedDataset { thetas, observations })
}

/// The ranking method evaluated in a cell: posterior means under a
/// parametric estimating prior, or the raw point estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RankingMethod {
    /// Posterior-mean ranking under the named estimating family.
    Family(ParametricFamily),
    /// Rank by the observed `x` alone (the no-shrinkage baseline).
    PointEstimate,
}

impl RankingMethod {
    /// Stable label used in reports.
    #[must_use]
    pub fn name(self) -> &'static str {
        match self {
            RankingMethod::Family(f) => f.name(),
            RankingMethod::PointEstimate => "point_estimate",
        }
    }
}

impl std::str::FromStr for RankingMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "point_estimate" {
            Ok(RankingMethod::PointEstimate)
        } else {
            Ok(RankingMethod::Family(s.parse()?))
        }
    }
}

impl Serialize for RankingMethod {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for RankingMethod {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Aggregated result of one simulation cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    /// Family label of the true prior.
    pub true_family: String,
    /// The ranking method evaluated.
    pub method: RankingMethod,
    /// Parameter mode for family methods; absent for the point-estimate
    /// baseline, which has no parameters.
    pub parameter_mode: Option<ParameterMode>,
    /// Units per dataset.
    pub n: usize,
    /// Replicates attempted.
    pub replicates: usize,
    /// Replicates whose estimation failed (excluded from the averages).
    pub failed_replicates: usize,
    /// Average weighted top-decile loss over the successful replicates.
    pub mean_loss: f64,
    /// Monte Carlo standard error of `mean_loss` (0 for one replicate).
    pub loss_se: f64,
    /// Mean fitted (or chosen) natural parameter across replicates, when
    /// the method has one.
    pub mean_parameter: Option<f64>,
    /// Standard deviation of the fitted parameter across replicates
    /// (0 in optimal mode, where the parameter is fixed).
    pub parameter_sd: Option<f64>,
}

/// Run one (true prior, estimating family) cell of the study.
///
/// In optimal mode the parameter is computed once from the loss theory; in
/// tail-MLE mode it is refitted per replicate at the true prior's
/// 90th-percentile cutoff. Replicates whose estimation fails are counted
/// and excluded; the cell errors only if every replicate fails (or the
/// optimal parameter itself cannot be computed, e.g. for a discrete truth).
pub fn run_cell(config: &SimulationConfig, family: ParametricFamily) -> Result<CellResult> {
    run_cell_method(config, RankingMethod::Family(family))
}

/// Run the point-estimate baseline for the configured true prior: the same
/// replicates and reference rankings, with units ranked by raw `x`.
pub fn run_point_estimate_cell(config: &SimulationConfig) -> Result<CellResult> {
    run_cell_method(config, RankingMethod::PointEstimate)
}

/// Shared cell driver for both family methods and the baseline.
pub fn run_cell_method(config: &SimulationConfig, method: RankingMethod) -> Result<CellResult> {
    config.validate()?;
    let cutoff = config.true_prior.quantile(TAIL_QUANTILE)?;

    // In optimal mode the estimating prior is the same for every replicate.
    // When the family contains the truth the optimal parameter is the true
    // parameter itself; reusing the true prior verbatim makes the diagonal
    // of a study table exactly zero (identical rankings, identical ties).
    let fixed: Option<(PriorSpec, f64)> = match method {
        RankingMethod::Family(family)
            if config.parameter_mode == ParameterMode::Optimal =>
        {
            Some(match (&config.true_prior, family) {
                (PriorSpec::Normal { tau }, ParametricFamily::Normal) => {
                    (config.true_prior.clone(), *tau)
                }
                (PriorSpec::Exponential { rate }, ParametricFamily::Exponential) => {
                    (config.true_prior.clone(), *rate)
                }
                (PriorSpec::Pareto { shape, .. }, ParametricFamily::Pareto) => {
                    (config.true_prior.clone(), *shape)
                }
                _ => {
                    let p = optimal_hyperparameter(&config.true_prior, family, cutoff)?;
                    (build_estimating_prior(&config.true_prior, family, p), p)
                }
            })
        }
        _ => None,
    };

    let outcomes: Vec<Result<(f64, Option<f64>)>> = (0..config.replicates)
        .into_par_iter()
        .map(|r| replicate_outcome(config, method, cutoff, fixed.as_ref(), r))
        .collect();

    // Deterministic ordered reduction: fold in replicate order regardless
    // of which worker finished first.
    let mut losses = Vec::with_capacity(config.replicates);
    let mut params = Vec::with_capacity(config.replicates);
    let mut failed = 0usize;
    let mut first_error: Option<Error> = None;
    for outcome in outcomes {
        match outcome {
            Ok((loss, param)) => {
                losses.push(loss);
                if let Some(p) = param {
                    params.push(p);
                }
            }
            Err(e) => {
                failed += 1;
                first_error.get_or_insert(e);
            }
        }
    }
    if losses.is_empty() {
        let cause = first_error.expect("no successes implies at least one failure");
        return Err(Error::Estimation(format!(
            "all {} replicates failed; first failure: {cause}",
            config.replicates
        )));
    }

    let (mean_loss, loss_se) = mean_and_se(&losses);
    let (mean_parameter, parameter_sd) = if params.is_empty() {
        (None, None)
    } else {
        let (m, _) = mean_and_se(&params);
        (Some(m), Some(sd(&params, m)))
    };
    Ok(CellResult {
        true_family: config.true_prior.family().to_string(),
        method,
        parameter_mode: match method {
            RankingMethod::Family(_) => Some(config.parameter_mode),
            RankingMethod::PointEstimate => None,
        },
        n: config.n,
        replicates: config.replicates,
        failed_replicates: failed,
        mean_loss,
        loss_se,
        mean_parameter,
        parameter_sd,
    })
}

/// One replicate of one cell: simulate, rank twice, score the gap.
fn replicate_outcome(
    config: &SimulationConfig,
    method: RankingMethod,
    cutoff: f64,
    fixed: Option<&(PriorSpec, f64)>,
    replicate: usize,
) -> Result<(f64, Option<f64>)> {
    let data = simulate_dataset(config, replicate)?;
    let reference = rank_units(&config.true_prior, &data.observations)?;
    let (estimated, param) = match method {
        RankingMethod::PointEstimate => (rank_by_point_estimate(&data.observations), None),
        RankingMethod::Family(family) => {
            let (prior, param) = match fixed {
                Some((prior, param)) => (prior.clone(), *param),
                None => {
                    let sample = TailSample::from_threshold(&data.observations, cutoff)?;
                    let param = match family {
                        ParametricFamily::Normal => fit_tail_normal(&sample)?,
                        ParametricFamily::Exponential => fit_tail_exponential(&sample)?,
                        ParametricFamily::Pareto => fit_tail_pareto(&sample)?,
                    };
                    (build_estimating_prior(&config.true_prior, family, param), param)
                }
            };
            (rank_units(&prior, &data.observations)?, Some(param))
        }
    };
    let loss = weighted_top_decile_loss(&data.thetas, &estimated, &reference)?;
    Ok((loss, param))
}

/// Build the estimating prior for a family and its natural parameter. A
/// Pareto estimating prior reuses the true prior's lower endpoint when the
/// truth is Pareto, and the known default otherwise.
fn build_estimating_prior(
    true_prior: &PriorSpec,
    family: ParametricFamily,
    natural_param: f64,
) -> PriorSpec {
    match family {
        ParametricFamily::Normal => PriorSpec::Normal { tau: natural_param },
        ParametricFamily::Exponential => PriorSpec::Exponential { rate: natural_param },
        ParametricFamily::Pareto => {
            let min = match true_prior {
                PriorSpec::Pareto { min, .. } => *min,
                _ => DEFAULT_PARETO_MIN,
            };
            PriorSpec::Pareto { min, shape: natural_param }
        }
    }
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (m * (m - 1.0))).sqrt())
}

fn sd(values: &[f64], mean: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (ss / (values.len() as f64 - 1.0)).sqrt()
}

/// Variance of `sigma^2` when `sigma = offset + E` with `E` exponential of
/// the given mean — the per-pair loss scale `E[(sigma_1^2 - sigma_2^2)^2]/2`
/// for independent noise levels.
#[must_use]
pub fn sigma_squared_variance(sigma_mean: f64, sigma_offset: f64) -> f64 {
    let m = sigma_mean;
    let c = sigma_offset;
    // E[(c + E)^2] and E[(c + E)^4] via the exponential moments E[E^k] = k! m^k.
    let e2 = c * c + 2.0 * c * m + 2.0 * m * m;
    let e4 = c.powi(4)
        + 4.0 * c.powi(3) * m
        + 12.0 * c * c * m * m
        + 24.0 * c * m.powi(3)
        + 24.0 * m.powi(4);
    e4 - e2 * e2
}

/// Theory-side prediction of a cell's expected loss scale:
/// misspecification integral at the family's rate parameter, times the
/// per-pair noise factor `E[(sigma_1^2 - sigma_2^2)^2]/2 = Var(sigma^2)`,
/// times the number of unit pairs.
///
/// The pair count treats every pair as contributing, so the prediction is
/// proportional to (not calibrated against) the weighted top-decile loss;
/// within a fixed `n` it ranks cells, which is how it is tested.
pub fn theoretical_cell_prediction(
    true_prior: &PriorSpec,
    family: ParametricFamily,
    rate_parameter: f64,
    cutoff: f64,
    n: usize,
    sigma_mean: f64,
    sigma_offset: f64,
) -> Result<f64> {
    let integral =
        misspecification_integral_for_family(true_prior, family, rate_parameter, cutoff)?;
    let pairs = 0.5 * n as f64 * (n as f64 - 1.0);
    Ok(integral * sigma_squared_variance(sigma_mean, sigma_offset) * pairs)
}

/// One (units, replicates) scale of a study grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyScale {
    /// Units per dataset.
    pub n: usize,
    /// Replicates at this size.
    pub replicates: usize,
}

/// A full study grid: true priors x scales x parameter modes x (three
/// estimating families + the point-estimate baseline).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyConfig {
    /// True priors to simulate under.
    pub true_priors: Vec<PriorSpec>,
    /// Dataset sizes with their replicate counts.
    pub scales: Vec<StudyScale>,
    /// Mean of the exponential noise-level distribution.
    pub sigma_mean: f64,
    /// Additive noise-level floor.
    pub sigma_offset: f64,
    /// Root seed shared by every cell (cells with the same true prior and
    /// scale therefore analyse identical datasets).
    pub seed: u64,
    /// Parameter modes to evaluate.
    pub modes: Vec<ParameterMode>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            true_priors: vec![
                PriorSpec::Normal { tau: 1.0 },
                PriorSpec::Exponential { rate: 1.0 },
                PriorSpec::Pareto { min: 0.5, shape: 2.0 },
            ],
            scales: vec![
                StudyScale { n: 1000, replicates: 200 },
                StudyScale { n: 10_000, replicates: 50 },
            ],
            sigma_mean: 0.02,
            sigma_offset: 1e-4,
            seed: 0,
            modes: vec![ParameterMode::Optimal, ParameterMode::TailMle],
        }
    }
}

/// Run the whole grid, in a fixed deterministic order: for each true prior,
/// scale, and mode, the three estimating families; then one point-estimate
/// baseline per (true prior, scale).
pub fn run_study(study: &StudyConfig) -> Result<Vec<CellResult>> {
    if study.true_priors.is_empty() || study.scales.is_empty() || study.modes.is_empty() {
        return Err(Error::invalid(
            "study grid needs at least one true prior, one scale, and one mode",
        ));
    }
    let mut cells = Vec::new();
    for true_prior in &study.true_priors {
        for scale in &study.scales {
            let base = SimulationConfig {
                true_prior: true_prior.clone(),
                n: scale.n,
                replicates: scale.replicates,
                sigma_mean: study.sigma_mean,
                sigma_offset: study.sigma_offset,
                seed: study.seed,
                parameter_mode: ParameterMode::Optimal,
            };
            for &mode in &study.modes {
                let config = SimulationConfig { parameter_mode: mode, ..base.clone() };
                for family in [
                    ParametricFamily::Normal,
                    ParametricFamily::Exponential,
                    ParametricFamily::Pareto,
                ] {
                    cells.push(run_cell(&config, family)?);
                }
            }
            cells.push(run_point_estimate_cell(&base)?);
        }
    }
    Ok(cells)
}
