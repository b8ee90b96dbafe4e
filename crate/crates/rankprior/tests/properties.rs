//! Randomized cross-module invariants: properties that must hold for every
//! valid input, not just the frozen reference cases.

use proptest::collection::vec;
use proptest::prelude::*;

use rankprior::io::{self, InputFormat, OutputFormat};
use rankprior::loss::{inversion_decomposition, loss_breakdown};
use rankprior::posterior::{rank_by_point_estimate, RankedList};
use rankprior::sim::SimulationConfig;
use rankprior::tail::{fit_tail_exponential, fit_tail_normal, fit_tail_pareto};
use rankprior::{
    isotaxis_curve, posterior_mean, posterior_mean_approx, rank_units, simulate_dataset,
    Observation, PriorSpec, TailSample,
};

// ---------------------------------------------------------------------------
// Strategies
// ---------------------------------------------------------------------------

fn continuous_prior() -> impl Strategy<Value = PriorSpec> {
    prop_oneof![
        (0.2f64..3.0).prop_map(|tau| PriorSpec::Normal { tau }),
        (0.2f64..3.0).prop_map(|rate| PriorSpec::Exponential { rate }),
        (0.2f64..3.0).prop_map(|rate| PriorSpec::ImproperExponential { rate }),
        ((0.2f64..2.0), (0.6f64..4.0))
            .prop_map(|(min, shape)| PriorSpec::Pareto { min, shape }),
    ]
}

fn discrete_prior() -> impl Strategy<Value = PriorSpec> {
    (2usize..6)
        .prop_flat_map(|k| (vec(-5.0f64..5.0, k), vec(0.05f64..1.0, k)))
        .prop_map(|(support, weights)| {
            PriorSpec::discrete(support, weights).expect("strategy yields valid atoms")
        })
}

fn any_prior() -> impl Strategy<Value = PriorSpec> {
    prop_oneof![4 => continuous_prior(), 1 => discrete_prior()]
}

/// Interior score levels every family can reach at any noise level.
fn reachable_level(prior: &PriorSpec) -> BoxedStrategy<f64> {
    match prior {
        // Normal and improper-exponential isotaxes are global closed forms.
        PriorSpec::Normal { .. } | PriorSpec::ImproperExponential { .. } => {
            (-2.0f64..2.0).boxed()
        }
        // Exponential scores are positive.
        PriorSpec::Exponential { .. } => (0.05f64..2.0).boxed(),
        // Pareto scores exceed the support minimum.
        PriorSpec::Pareto { min, .. } => {
            let lo = min + 0.05;
            (lo..lo + 3.0).boxed()
        }
        // Discrete scores live strictly inside the support hull.
        PriorSpec::Discrete { support, .. } => {
            let (lo, hi) = (support[0], support[support.len() - 1]);
            let pad = 0.05 * (hi - lo);
            (lo + pad..hi - pad).boxed()
        }
    }
}

// ---------------------------------------------------------------------------
// Priors and serialization
// ---------------------------------------------------------------------------

proptest! {
    /// JSON round-trips reproduce the prior exactly, parameters bit for bit.
    #[test]
    fn prior_json_round_trip_is_exact(prior in any_prior()) {
        let text = serde_json::to_string(&prior).unwrap();
        let back: PriorSpec = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, prior);
    }
}

// ---------------------------------------------------------------------------
// Ranking structure
// ---------------------------------------------------------------------------

proptest! {
    /// Rankings are stable descending permutations: structural invariants
    /// hold and `positions` inverts `order`, even with heavy ties.
    #[test]
    fn rankings_are_stable_descending_permutations(
        raw in vec(-3.0f64..3.0, 1..40),
        dup_every in 1usize..4,
    ) {
        // Force exact ties by rounding a subset of the scores.
        let scores: Vec<f64> = raw
            .iter()
            .enumerate()
            .map(|(i, &s)| if i % dup_every == 0 { s.round() } else { s })
            .collect();
        let ranking = RankedList::from_scores(scores.clone());
        prop_assert!(ranking.check_invariants().is_ok());
        let positions = ranking.positions();
        for (rank, &unit) in ranking.order.iter().enumerate() {
            prop_assert_eq!(positions[unit], rank);
            prop_assert_eq!(ranking.scores[rank], scores[unit]);
        }
    }
}

// ---------------------------------------------------------------------------
// Posterior means
// ---------------------------------------------------------------------------

proptest! {
    /// Zero noise means zero shrinkage for every family.
    #[test]
    fn zero_noise_returns_the_estimate(prior in any_prior(), x in -4.0f64..4.0) {
        let got = posterior_mean(&prior, Observation::new(x, 0.0).unwrap()).unwrap();
        prop_assert_eq!(got, x);
    }

    /// The improper-exponential score is exactly `x - rate * sigma^2`, and
    /// its first-order approximation is not an approximation at all.
    #[test]
    fn improper_exponential_scores_are_exact(
        rate in 0.1f64..4.0,
        x in -5.0f64..5.0,
        sigma in 0.0f64..2.0,
    ) {
        let prior = PriorSpec::ImproperExponential { rate };
        let obs = Observation::new(x, sigma).unwrap();
        let exact = posterior_mean(&prior, obs).unwrap();
        prop_assert_eq!(exact, x - rate * sigma * sigma);
        prop_assert_eq!(posterior_mean_approx(&prior, obs).unwrap(), exact);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    /// Posterior means stay inside the prior's support hull.
    #[test]
    fn posterior_means_stay_in_the_support_hull(
        prior in any_prior(),
        x in -4.0f64..4.0,
        sigma in 0.01f64..1.5,
    ) {
        let mean = posterior_mean(&prior, Observation::new(x, sigma).unwrap()).unwrap();
        let slack = 1e-7 * (1.0 + mean.abs());
        match &prior {
            PriorSpec::Normal { .. } | PriorSpec::ImproperExponential { .. } => {
                prop_assert!(mean.is_finite());
            }
            PriorSpec::Exponential { .. } => prop_assert!(mean >= -slack, "mean {mean}"),
            PriorSpec::Pareto { min, .. } => {
                prop_assert!(mean >= min - slack, "mean {mean} below min {min}")
            }
            PriorSpec::Discrete { support, .. } => {
                let (lo, hi) = (support[0], support[support.len() - 1]);
                prop_assert!(mean >= lo - slack && mean <= hi + slack, "mean {mean}");
            }
        }
    }

    /// The normal-likelihood family has a monotone likelihood ratio, so the
    /// posterior mean is nondecreasing in the estimate for every prior.
    #[test]
    fn posterior_mean_is_monotone_in_the_estimate(
        prior in any_prior(),
        lo in -4.0f64..4.0,
        gap in 0.01f64..3.0,
        sigma in 0.02f64..1.5,
    ) {
        let hi = lo + gap;
        let first = posterior_mean(&prior, Observation::new(lo, sigma).unwrap()).unwrap();
        let second = posterior_mean(&prior, Observation::new(hi, sigma).unwrap()).unwrap();
        let slack = 1e-7 * (1.0 + first.abs().max(second.abs()));
        prop_assert!(
            second + slack >= first,
            "mean fell from {first} to {second} as x rose from {lo} to {hi}"
        );
    }

    /// `rank_units` is exactly the stable descending sort of the per-unit
    /// posterior means.
    #[test]
    fn ranking_agrees_with_per_unit_scores(
        prior in continuous_prior(),
        data in vec(((-3.0f64..3.0), (0.02f64..1.0)), 2..15),
    ) {
        let units: Vec<Observation> =
            data.iter().map(|&(x, s)| Observation::new(x, s).unwrap()).collect();
        let ranking = rank_units(&prior, &units).unwrap();
        let scores: Vec<f64> =
            units.iter().map(|&o| posterior_mean(&prior, o).unwrap()).collect();
        let expected = RankedList::from_scores(scores);
        prop_assert_eq!(ranking, expected);
    }
}

// ---------------------------------------------------------------------------
// Misranking losses
// ---------------------------------------------------------------------------

proptest! {
    /// Cutoff losses are nonnegative, their total equals the inversion
    /// decomposition, and the weighted top-decile loss against the true
    /// ranking is nonnegative.
    #[test]
    fn loss_breakdown_invariants(
        thetas in vec(-5.0f64..5.0, 10..60),
        est_scores in vec(-5.0f64..5.0, 60),
    ) {
        let estimated = RankedList::from_scores(est_scores[..thetas.len()].to_vec());
        let reference = RankedList::from_scores(thetas.clone());
        let breakdown = loss_breakdown(&thetas, &estimated, &reference).unwrap();

        prop_assert_eq!(breakdown.per_cutoff.len(), thetas.len());
        for (k, &l) in breakdown.per_cutoff.iter().enumerate() {
            prop_assert!(l >= -1e-12, "cutoff loss l_{} = {l} negative", k + 1);
        }
        let by_inversions = inversion_decomposition(&thetas, &estimated).unwrap();
        let scale = 1.0 + by_inversions.abs();
        prop_assert!(
            (breakdown.total_over_cutoffs - by_inversions).abs() <= 1e-9 * scale,
            "total {} vs inversion decomposition {by_inversions}",
            breakdown.total_over_cutoffs
        );
        prop_assert!(breakdown.weighted_top_decile >= -1e-12);
        prop_assert_eq!(breakdown.cutoff_count, thetas.len() / 10);

        // The reference ranking itself incurs zero weighted loss.
        let self_loss = loss_breakdown(&thetas, &reference, &reference).unwrap();
        prop_assert!(self_loss.weighted_top_decile.abs() <= 1e-12);
    }
}

// ---------------------------------------------------------------------------
// Tail samples and tail fits
// ---------------------------------------------------------------------------

proptest! {
    /// Thresholding keeps exactly the strict exceedances, and fails exactly
    /// when fewer than two survive.
    #[test]
    fn tail_thresholding_keeps_exactly_the_exceedances(
        data in vec(((-3.0f64..5.0), (0.0f64..0.5)), 0..20),
        cutoff in -1.0f64..4.0,
    ) {
        let units: Vec<Observation> =
            data.iter().map(|&(x, s)| Observation::new(x, s).unwrap()).collect();
        let expected: Vec<Observation> =
            units.iter().copied().filter(|o| o.x > cutoff).collect();
        match TailSample::from_threshold(&units, cutoff) {
            Ok(sample) => {
                prop_assert!(expected.len() >= 2);
                prop_assert_eq!(sample.n_a(), expected.len());
                prop_assert_eq!(sample.observations, expected);
                prop_assert_eq!(sample.cutoff, cutoff);
            }
            Err(_) => prop_assert!(expected.len() < 2, "{} exceedances rejected", expected.len()),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    /// Fitted tail parameters are positive, finite, and (for the
    /// exponential family) kill the likelihood score.
    #[test]
    fn tail_fits_are_positive_and_satisfy_their_score(
        cutoff in 0.5f64..3.0,
        exceedances in vec(((0.01f64..3.0), (0.0f64..0.4)), 2..12),
    ) {
        let units: Vec<Observation> = exceedances
            .iter()
            .map(|&(e, s)| Observation::new(cutoff + e, s).unwrap())
            .collect();
        let sample = TailSample::new(units, cutoff).unwrap();

        let lambda = fit_tail_exponential(&sample).unwrap();
        prop_assert!(lambda.is_finite() && lambda > 0.0, "rate {lambda}");
        let n = sample.n_a() as f64;
        let s: f64 = sample.observations.iter().map(|o| o.x - cutoff).sum();
        let v: f64 = sample.observations.iter().map(|o| o.sigma * o.sigma).sum();
        if s * s - 4.0 * n * v >= 0.0 {
            let score = n / lambda - s + lambda * v;
            prop_assert!(score.abs() <= 1e-9 * (1.0 + s), "residual score {score}");
        } else {
            // Noise dominates: the fit falls back to the noiseless MLE.
            prop_assert!((lambda - n / s).abs() <= 1e-12 * (1.0 + n / s));
        }

        let alpha = fit_tail_pareto(&sample).unwrap();
        prop_assert!(alpha.is_finite() && alpha > 0.0, "index {alpha}");

        if let Ok(tau) = fit_tail_normal(&sample) {
            prop_assert!(tau.is_finite() && tau > 0.0, "scale {tau}");
        }
    }
}

// ---------------------------------------------------------------------------
// Equal-score curves
// ---------------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    /// Every point an equal-score curve returns scores back to its level.
    /// (The Pareto closed form is a deliberate first-order approximation,
    /// so it is checked through its own definition elsewhere; here the
    /// families whose curves are exact must reproduce the level through the
    /// exact posterior mean.)
    #[test]
    fn isotaxis_points_reproduce_their_level(
        (prior, level) in any_prior()
            .prop_filter("pareto curves are first-order by design", |p| {
                !matches!(p, PriorSpec::Pareto { .. })
            })
            .prop_flat_map(|p| {
                let level = reachable_level(&p);
                (Just(p), level)
            }),
        grid in vec(0.0f64..2.5, 1..5),
    ) {
        let curve = isotaxis_curve(&prior, level, &grid).unwrap();
        prop_assert_eq!(curve.points.len() + curve.skipped_points, grid.len());
        prop_assert!(curve.skipped_points == 0, "interior level must be reachable");
        for &(x, v) in &curve.points {
            let score =
                posterior_mean(&prior, Observation::new(x, v.sqrt()).unwrap()).unwrap();
            prop_assert!(
                (score - level).abs() < 1e-8,
                "point ({x}, {v}) scores {score}, level {level}"
            );
        }
    }
}

// ---------------------------------------------------------------------------
// Simulation reproducibility
// ---------------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

    /// Replicates are bit-reproducible, aligned, respect the noise floor,
    /// and draw effects independently of the noise scale.
    #[test]
    fn simulated_replicates_are_reproducible_and_decoupled(
        prior in any_prior().prop_filter("improper priors cannot be sampled", |p| {
            !matches!(p, PriorSpec::ImproperExponential { .. })
        }),
        n in 10usize..40,
        seed in any::<u64>(),
        replicate in 0usize..4,
        sigma_mean in 0.005f64..0.1,
        sigma_offset in 0.0f64..0.01,
    ) {
        let config = SimulationConfig {
            true_prior: prior,
            n,
            replicates: 5,
            sigma_mean,
            sigma_offset,
            seed,
            ..SimulationConfig::default()
        };
        let first = simulate_dataset(&config, replicate).unwrap();
        let second = simulate_dataset(&config, replicate).unwrap();
        prop_assert_eq!(&first, &second, "same seed and replicate must agree bitwise");

        prop_assert_eq!(first.thetas.len(), n);
        prop_assert_eq!(first.observations.len(), n);
        for o in &first.observations {
            prop_assert!(o.sigma >= sigma_offset, "sigma {} under the floor", o.sigma);
        }

        // Doubling the noise scale must not touch the effects: they come
        // from a separate stream.
        let noisier = SimulationConfig { sigma_mean: sigma_mean * 2.0, ..config.clone() };
        let shifted = simulate_dataset(&noisier, replicate).unwrap();
        prop_assert_eq!(&shifted.thetas, &first.thetas);
        prop_assert!(
            shifted.observations.iter().zip(&first.observations).any(|(a, b)| a.sigma != b.sigma),
            "noise levels should respond to the scale change"
        );

        // A different replicate index yields different data.
        let other = simulate_dataset(&config, replicate + 1).unwrap();
        prop_assert!(other.thetas != first.thetas);
    }
}

// ---------------------------------------------------------------------------
// Round-tripping through the exchange formats
// ---------------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    /// Ranked CSV output re-ingests to the exact same estimates and
    /// standard errors, bit for bit.
    #[test]
    fn ranked_csv_round_trips_bitwise(
        data in vec(((-1e6f64..1e6), (1e-9f64..1e3)), 1..20),
    ) {
        let units: Vec<io::LabeledObservation> = data
            .iter()
            .enumerate()
            .map(|(i, &(x, s))| io::LabeledObservation {
                id: format!("u{i}"),
                observation: Observation::new(x, s).unwrap(),
            })
            .collect();
        let observations: Vec<Observation> =
            units.iter().map(|u| u.observation).collect();
        let ranked = rank_by_point_estimate(&observations);
        let rows = io::ranked_rows(&units, &ranked).unwrap();
        let mut bytes = Vec::new();
        io::write_rows(&rows, OutputFormat::Csv, &mut bytes).unwrap();
        let text = String::from_utf8(bytes).unwrap();

        let report = io::ingest_str(&text, InputFormat::Auto).unwrap();
        prop_assert_eq!(report.rejects.len(), 0);
        prop_assert_eq!(report.units.len(), units.len());
        // Ingest preserves file order; the file lists units in rank order.
        for (row, unit) in report.units.iter().zip(ranked.order.iter().map(|&u| &units[u])) {
            prop_assert_eq!(&row.id, &unit.id);
            prop_assert_eq!(row.observation.x.to_bits(), unit.observation.x.to_bits());
            prop_assert_eq!(
                row.observation.sigma.to_bits(),
                unit.observation.sigma.to_bits()
            );
        }
    }
}
