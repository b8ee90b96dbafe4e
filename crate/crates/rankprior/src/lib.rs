//! Empirical-Bayes posterior-mean ranking for noisy unit-level estimates.
//!
//! Many screening problems reduce to the same shape: each unit `i` (a gene,
//! a hospital, a fund, ...) has an unknown effect `theta_i`, and we observe a
//! noisy estimate `x_i ~ Normal(theta_i, sigma_i^2)` with a known standard
//! error `sigma_i`. Ranking units by raw `x_i` over-promotes high-variance
//! units; ranking by the posterior mean `E[theta_i | x_i, sigma_i]` under a
//! prior on the effects corrects for that. This crate provides the pieces of
//! that workflow:
//!
//! - [`prior`]: prior families (normal, exponential, improper exponential,
//!   Pareto, discrete) with densities, shrinkage rates, quantiles, sampling,
//!   and a stable JSON schema.
//! - [`posterior`]: posterior means (closed forms where available, adaptive
//!   quadrature otherwise), the first-order approximation
//!   `x - lambda(x) sigma^2`, and deterministic ranking.
//! - [`loss`]: the misranking loss, its decomposition over inverted pairs,
//!   weighted top-decile loss between two rankings, and closed-form theory
//!   for how much expected loss a misspecified or misestimated prior adds.
//! - [`npmle`]: nonparametric maximum-likelihood estimation of a discrete
//!   mixing distribution by EM on a support grid, with robustness bounds on
//!   how far posterior means can move an observation.
//! - [`tail`]: maximum-likelihood fitting of normal / exponential / Pareto
//!   priors to the upper tail of the observed estimates, accounting for
//!   per-unit noise.
//! - [`isotax`]: iso-posterior-mean curves in the (estimate, variance) plane,
//!   selection thresholds, and significance curves for comparison.
//! - [`sim`]: a reproducible simulation harness measuring ranking loss under
//!   combinations of true and estimating priors.
//! - [`io`]: CSV ingestion (direct estimates or odds ratios with confidence
//!   intervals) and output writers.
//! - [`svg`]: dependency-free SVG rendering of the decision plane.
//!
//! The `rankprior` binary exposes the same functionality as a command-line
//! tool; see the repository README for the command surface.
//!
//! # Numerical conventions
//!
//! Scalar tolerances are documented where declared. All randomness flows
//! through [`rng::stream_rng`], a counter-based seeding scheme that makes
//! every result bit-reproducible for a given seed on every platform.

pub mod error;
pub mod io;
pub mod isotax;
pub mod sim;
pub mod svg;
pub mod loss;
pub mod npmle;
pub mod num;
pub mod posterior;
pub mod prior;
pub mod rng;
pub mod tail;

pub use error::{Error, Result};
pub use isotax::{isotaxis_curve, rank_threshold, significance_curve, IsotaxisCurve};
pub use sim::{
    run_cell, run_study, simulate_dataset, CellResult, ParameterMode, RankingMethod,
    SimulationConfig, StudyConfig,
};
pub use io::{ingest_path, ingest_str, IngestReport, InputFormat, LabeledObservation, OutputFormat};
pub use svg::{scatter_figure, FigureOptions};
pub use loss::{LossBreakdown, LossScenario, ParametricFamily};
pub use npmle::{fit_npmle, NpmleConfig, NpmleFit};
pub use posterior::{posterior_mean, posterior_mean_approx, rank_by_point_estimate, rank_units, RankedList};
pub use prior::{Observation, PriorSpec};
pub use tail::{fit_tail_exponential, fit_tail_normal, fit_tail_pareto, TailSample};
