//! Command-line interface: rank datasets, export iso-score curves and
//! figures, reproduce the reference loss tables, run simulation studies,
//! and fit priors.
//!
//! Exit codes: 0 on success, 1 on usage or input errors, 2 on numerical
//! failure. All output is deterministic: identical inputs, flags, and seed
//! produce byte-identical files. `RANKPRIOR_THREADS` caps the worker pool;
//! `--quiet` silences progress on stderr (warnings still print).

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rankprior::error::{Error, Result};
use rankprior::io::{
    curve_rows, curve_rows_sigma, ingest_path, naive_normal_variance, ranked_rows, write_rows,
    IngestReport, InputFormat, OutputFormat,
};
use rankprior::isotax::top_fraction_curve;
use rankprior::loss::{reference_loss_table, ParametricFamily};
use rankprior::npmle::{fit_npmle, NpmleConfig};
use rankprior::posterior::rank_units;
use rankprior::prior::{Observation, PriorSpec};
use rankprior::sim::{run_study, StudyConfig};
use rankprior::svg::{scatter_figure, FigureOptions};
use rankprior::tail::{fit_tail_exponential, fit_tail_normal, fit_tail_pareto, TailSample};

/// Empirical-Bayes ranking of noisy unit-level estimates.
#[derive(Parser)]
#[command(name = "rankprior", version, about)]
struct Cli {
    /// Suppress progress output on stderr (warnings still print).
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rank units by posterior mean under an estimating prior.
    Rank(RankArgs),
    /// Export iso-score (constant posterior mean) curves for a dataset,
    /// optionally as a self-contained SVG figure.
    Isotax(IsotaxArgs),
    /// Reference table: optimal estimating parameters, expected-loss
    /// integrals, and misestimation sensitivities per (true, estimating)
    /// family pair, plus point-estimate baselines.
    LossTable(LossTableArgs),
    /// Run a seeded ranking-loss simulation study.
    Simulate(SimulateArgs),
    /// Fit a prior to a dataset and emit it as JSON.
    FitPrior(FitPriorArgs),
}

#[derive(Args)]
struct OutputArgs {
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format: csv or json.
    #[arg(long, default_value = "csv")]
    format: String,
    /// Seed for randomized steps (used by simulate; accepted everywhere so
    /// scripts can pass it uniformly).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct InputArgs {
    /// Input dataset: CSV with a header row, either (id, estimate, stderr)
    /// or (id, odds_ratio, ci_low, ci_high).
    #[arg(long)]
    input: PathBuf,
    /// Input schema: auto, estimates, or odds-ratios.
    #[arg(long, default_value = "auto")]
    input_format: String,
}

#[derive(Args)]
struct PriorArgs {
    /// Estimating prior: inline JSON such as
    /// '{"family":"normal","params":{"tau":1.0}}'; a shorthand such as
    /// normal:1.0, exponential:0.8, improper-exponential:2.0, or
    /// pareto:0.5,2.0; "npmle" to fit a nonparametric prior to the input;
    /// or fit-tail:<normal|exponential|pareto> for a tail-truncated
    /// maximum-likelihood fit.
    #[arg(long)]
    prior: String,
    /// Quantile of the observed estimates used as the truncation cutoff
    /// for fit-tail priors.
    #[arg(long, default_value_t = 0.9)]
    tail_quantile: f64,
    /// Known lower endpoint for fitted Pareto priors.
    #[arg(long, default_value_t = 0.5)]
    pareto_min: f64,
}

#[derive(Args)]
struct RankArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    prior: PriorArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct IsotaxArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    prior: PriorArgs,
    #[command(flatten)]
    output: OutputArgs,
    /// Top fractions whose rank-threshold curves to compute
    /// (comma-separated, each in (0, 1)).
    #[arg(long, value_delimiter = ',', default_value = "0.1")]
    levels: Vec<f64>,
    /// Emit a self-contained SVG figure (scatter + curves + significance
    /// curve) instead of curve rows; --format is ignored.
    #[arg(long)]
    svg: bool,
    /// Two-sided normal significance level for the dashed null curve in
    /// the SVG.
    #[arg(long, default_value_t = 0.95)]
    significance: f64,
    /// Number of variance grid points per curve.
    #[arg(long, default_value_t = 100)]
    grid_points: usize,
    /// Export curve points as (x, sigma) instead of (x, variance).
    #[arg(long)]
    sigma_space: bool,
    /// Figure title (SVG only).
    #[arg(long)]
    title: Option<String>,
}

#[derive(Args)]
struct LossTableArgs {
    #[command(flatten)]
    output: OutputArgs,
    /// Tail quantile defining each true prior's cutoff.
    #[arg(long, default_value_t = 0.9)]
    cutoff_quantile: f64,
    /// True priors to tabulate (JSON or shorthand; repeatable). Defaults
    /// to the three reference priors: normal:1.0, exponential:1.0,
    /// pareto:0.5,2.0.
    #[arg(long = "true-prior")]
    true_priors: Vec<String>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    output: OutputArgs,
    /// Study configuration JSON (fields: true_priors, scales, sigma_mean,
    /// sigma_offset, seed, modes; all optional). Without it, the full
    /// reference grid runs, which takes a while.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct FitPriorArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Family to fit: normal, exponential, pareto, or npmle.
    #[arg(long)]
    family: String,
    /// Quantile of the observed estimates used as the truncation cutoff
    /// for parametric tail fits.
    #[arg(long, default_value_t = 0.9)]
    tail_quantile: f64,
    /// Known lower endpoint for a fitted Pareto prior.
    #[arg(long, default_value_t = 0.5)]
    pareto_min: f64,
    /// Normal family only: estimate the variance from the full dataset by
    /// method of moments (mean(x^2) - mean(sigma^2), floored at 1e-12)
    /// instead of the tail fit. Labeled "naive" in the output.
    #[arg(long)]
    naive: bool,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format (the fitted prior is a JSON document).
    #[arg(long, default_value = "json")]
    format: String,
    /// Accepted for interface uniformity; fitting is deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage problems exit 1 per the interface contract; help and
            // version are successes.
            use clap::error::ErrorKind;
            let ok = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            return ExitCode::from(u8::from(!ok));
        }
    };
    let result = configure_threads().and_then(|()| run(cli));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

/// 2 for numerical failures, 1 for everything else (usage, input, I/O).
fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Numerical(_)
        | Error::Domain(_)
        | Error::DivergentIntegral(_)
        | Error::Estimation(_) => 2,
        _ => 1,
    }
}

/// Apply the RANKPRIOR_THREADS cap before any parallel work starts.
fn configure_threads() -> Result<()> {
    match std::env::var("RANKPRIOR_THREADS") {
        Err(_) => Ok(()),
        Ok(v) => {
            let n: usize = v.trim().parse().map_err(|_| {
                Error::invalid(format!("RANKPRIOR_THREADS must be a positive integer, got '{v}'"))
            })?;
            if n == 0 {
                return Err(Error::invalid("RANKPRIOR_THREADS must be at least 1"));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| Error::invalid(format!("could not size the thread pool: {e}")))
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let quiet = cli.quiet;
    match cli.command {
        Command::Rank(args) => rank_command(args, quiet),
        Command::Isotax(args) => isotax_command(args, quiet),
        Command::LossTable(args) => loss_table_command(args, quiet),
        Command::Simulate(args) => simulate_command(args, quiet),
        Command::FitPrior(args) => fit_prior_command(args, quiet),
    }
}

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

/// Ingest the input file, reporting rejects (always) and a progress line
/// (unless quiet) on stderr.
fn load_dataset(args: &InputArgs, quiet: bool) -> Result<IngestReport> {
    let format: InputFormat = args.input_format.parse()?;
    let report = ingest_path(&args.input, format)?;
    const MAX_REJECT_LINES: usize = 20;
    for reject in report.rejects.iter().take(MAX_REJECT_LINES) {
        eprintln!("warning: line {}: {} (row skipped)", reject.line, reject.message);
    }
    if report.rejects.len() > MAX_REJECT_LINES {
        eprintln!("warning: ... and {} more rejected rows", report.rejects.len() - MAX_REJECT_LINES);
    }
    if !quiet {
        eprintln!(
            "ingested {} units from {} ({} rejected)",
            report.units.len(),
            args.input.display(),
            report.rejects.len()
        );
    }
    Ok(report)
}

fn open_output(out: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(std::io::BufWriter::new(std::fs::File::create(path)?)),
        None => Box::new(std::io::BufWriter::new(std::io::stdout())),
    })
}

/// Parse a prior literal: inline JSON or a family:params shorthand.
fn parse_prior_literal(spec: &str) -> Result<PriorSpec> {
    let spec = spec.trim();
    if spec.starts_with('{') {
        return PriorSpec::from_json(spec);
    }
    let (family, params) = spec.split_once(':').ok_or_else(|| {
        Error::invalid(format!(
            "cannot parse prior '{spec}': expected JSON, family:params shorthand \
             (normal:1.0, exponential:0.8, improper-exponential:2.0, pareto:0.5,2.0), \
             npmle, or fit-tail:<family>"
        ))
    })?;
    let numbers: Vec<f64> = params
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("prior parameter '{p}' is not a number")))
        })
        .collect::<Result<_>>()?;
    let expect = |k: usize| {
        if numbers.len() == k {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "prior family '{family}' takes {k} parameter(s), got {}",
                numbers.len()
            )))
        }
    };
    let prior = match family {
        "normal" => {
            expect(1)?;
            PriorSpec::Normal { tau: numbers[0] }
        }
        "exponential" => {
            expect(1)?;
            PriorSpec::Exponential { rate: numbers[0] }
        }
        "improper-exponential" | "improper_exponential" => {
            expect(1)?;
            PriorSpec::ImproperExponential { rate: numbers[0] }
        }
        "pareto" => {
            expect(2)?;
            PriorSpec::Pareto { min: numbers[0], shape: numbers[1] }
        }
        other => {
            return Err(Error::invalid(format!(
                "unknown prior family '{other}' (expected normal, exponential, \
                 improper-exponential, or pareto; use JSON for discrete priors)"
            )))
        }
    };
    prior.validate()?;
    Ok(prior)
}

/// The `q`-quantile of the observed estimates (ascending order statistic at
/// ceil(q n)), used as the data-driven tail cutoff.
fn empirical_quantile(obs: &[Observation], q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::invalid(format!("tail quantile must be in (0, 1), got {q}")));
    }
    if obs.is_empty() {
        return Err(Error::invalid("empirical quantile of an empty dataset"));
    }
    let mut xs: Vec<f64> = obs.iter().map(|o| o.x).collect();
    xs.sort_by(f64::total_cmp);
    let k = ((q * xs.len() as f64).ceil() as usize).clamp(1, xs.len());
    Ok(xs[k - 1])
}

/// An estimating prior resolved from `--prior`, with provenance for
/// progress messages.
struct ResolvedPrior {
    prior: PriorSpec,
    description: String,
}

/// Resolve `--prior`, fitting to the observations when the spec asks for
/// it (npmle or fit-tail).
fn resolve_prior(args: &PriorArgs, obs: &[Observation], quiet: bool) -> Result<ResolvedPrior> {
    let spec = args.prior.trim();
    if spec == "npmle" {
        let fit = fit_npmle(obs, &NpmleConfig::default())?;
        if !fit.converged {
            eprintln!(
                "warning: EM stopped after {} iterations without meeting the tolerance; \
                 using the best iterate (gradient ratio {:.6})",
                fit.iterations, fit.max_gradient_ratio
            );
        }
        if !quiet {
            eprintln!(
                "fitted nonparametric prior: {} support points, log-likelihood {:.6}",
                match &fit.prior {
                    PriorSpec::Discrete { support, .. } => support.len(),
                    _ => 0,
                },
                fit.log_likelihood
            );
        }
        return Ok(ResolvedPrior { prior: fit.prior, description: "npmle".to_string() });
    }
    if let Some(name) = spec.strip_prefix("fit-tail:") {
        let family: ParametricFamily = name.parse()?;
        let cutoff = empirical_quantile(obs, args.tail_quantile)?;
        let sample = TailSample::from_threshold(obs, cutoff)?;
        let parameter = match family {
            ParametricFamily::Normal => fit_tail_normal(&sample)?,
            ParametricFamily::Exponential => fit_tail_exponential(&sample)?,
            ParametricFamily::Pareto => fit_tail_pareto(&sample)?,
        };
        let prior = match family {
            ParametricFamily::Normal => PriorSpec::Normal { tau: parameter },
            ParametricFamily::Exponential => PriorSpec::Exponential { rate: parameter },
            ParametricFamily::Pareto => {
                PriorSpec::Pareto { min: args.pareto_min, shape: parameter }
            }
        };
        prior.validate()?;
        if !quiet {
            eprintln!(
                "fitted {} prior by tail maximum likelihood: parameter {:.6} \
                 (cutoff {:.6}, {} tail observations)",
                family.name(),
                parameter,
                cutoff,
                sample.observations.len()
            );
        }
        return Ok(ResolvedPrior {
            prior,
            description: format!("fit-tail:{}", family.name()),
        });
    }
    let prior = parse_prior_literal(spec)?;
    let description = prior.family().to_string();
    Ok(ResolvedPrior { prior, description })
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

fn rank_command(args: RankArgs, quiet: bool) -> Result<()> {
    let format: OutputFormat = args.output.format.parse()?;
    let report = load_dataset(&args.input, quiet)?;
    let observations = report.observations();
    let resolved = resolve_prior(&args.prior, &observations, quiet)?;
    let ranked = rank_units(&resolved.prior, &observations)?;
    let rows = ranked_rows(&report.units, &ranked)?;
    write_rows(&rows, format, open_output(args.output.out.as_ref())?)?;
    if !quiet {
        eprintln!("ranked {} units under the {} prior", rows.len(), resolved.description);
    }
    Ok(())
}

fn isotax_command(args: IsotaxArgs, quiet: bool) -> Result<()> {
    let report = load_dataset(&args.input, quiet)?;
    let observations = report.observations();
    let resolved = resolve_prior(&args.prior, &observations, quiet)?;

    if args.levels.is_empty() {
        return Err(Error::invalid("at least one --levels fraction is required"));
    }
    if args.grid_points < 2 {
        return Err(Error::invalid("--grid-points must be at least 2"));
    }
    // Variance grid spanning the dataset's noise levels, starting at the
    // noiseless axis where every curve meets its level.
    let v_max = observations
        .iter()
        .map(|o| o.sigma * o.sigma)
        .fold(0.0f64, f64::max);
    if v_max <= 0.0 {
        return Err(Error::invalid(
            "all observations have zero noise; curves would collapse to points",
        ));
    }
    let grid: Vec<f64> = (0..=args.grid_points)
        .map(|i| v_max * i as f64 / args.grid_points as f64)
        .collect();

    let mut curves = Vec::with_capacity(args.levels.len());
    for &alpha in &args.levels {
        let curve = top_fraction_curve(&resolved.prior, &observations, alpha, &grid)?;
        if curve.skipped_points > 0 {
            eprintln!(
                "warning: top-{alpha} curve: {} of {} grid points had no solution and were omitted",
                curve.skipped_points,
                grid.len()
            );
        }
        curves.push(curve);
    }

    let mut out = open_output(args.output.out.as_ref())?;
    if args.svg {
        let options = FigureOptions {
            title: args.title.clone(),
            significance_level: Some(args.significance),
            ..FigureOptions::default()
        };
        let svg = scatter_figure(&observations, &curves, &options)?;
        out.write_all(svg.as_bytes())?;
        out.flush()?;
    } else {
        let format: OutputFormat = args.output.format.parse()?;
        if args.sigma_space {
            write_rows(&curve_rows_sigma(&curves), format, out)?;
        } else {
            write_rows(&curve_rows(&curves), format, out)?;
        }
    }
    if !quiet {
        eprintln!(
            "computed {} threshold curve(s) under the {} prior",
            curves.len(),
            resolved.description
        );
    }
    Ok(())
}

fn loss_table_command(args: LossTableArgs, quiet: bool) -> Result<()> {
    let format: OutputFormat = args.output.format.parse()?;
    let priors: Vec<PriorSpec> = if args.true_priors.is_empty() {
        vec![
            PriorSpec::Normal { tau: 1.0 },
            PriorSpec::Exponential { rate: 1.0 },
            PriorSpec::Pareto { min: 0.5, shape: 2.0 },
        ]
    } else {
        args.true_priors
            .iter()
            .map(|s| parse_prior_literal(s))
            .collect::<Result<_>>()?
    };
    let rows = reference_loss_table(&priors, args.cutoff_quantile)?;
    write_rows(&rows, format, open_output(args.output.out.as_ref())?)?;
    if !quiet {
        eprintln!("tabulated {} rows for {} true prior(s)", rows.len(), priors.len());
    }
    Ok(())
}

fn simulate_command(args: SimulateArgs, quiet: bool) -> Result<()> {
    let format: OutputFormat = args.output.format.parse()?;
    let mut study: StudyConfig = match &args.config {
        Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
        None => StudyConfig::default(),
    };
    if let Some(seed) = args.output.seed {
        study.seed = seed;
    }
    if !quiet {
        let cells = study.true_priors.len()
            * study.scales.len()
            * (study.modes.len() * 3 + 1);
        eprintln!("running {cells} simulation cell(s) with seed {}", study.seed);
    }
    let cells = run_study(&study)?;
    write_rows(&cells, format, open_output(args.output.out.as_ref())?)?;
    if !quiet {
        let failed: usize = cells.iter().map(|c| c.failed_replicates).sum();
        eprintln!("completed {} cell(s); {} replicate failure(s)", cells.len(), failed);
    }
    Ok(())
}

fn fit_prior_command(args: FitPriorArgs, quiet: bool) -> Result<()> {
    match args.format.parse::<OutputFormat>()? {
        OutputFormat::Json => {}
        OutputFormat::Csv => {
            return Err(Error::invalid(
                "fit-prior emits a JSON document; --format csv is not supported here",
            ))
        }
    }
    let report = load_dataset(&args.input, quiet)?;
    let observations = report.observations();

    let document = if args.family == "npmle" {
        if args.naive {
            return Err(Error::invalid("--naive applies only to --family normal"));
        }
        let fit = fit_npmle(&observations, &NpmleConfig::default())?;
        if !fit.converged {
            eprintln!(
                "warning: EM stopped after {} iterations without meeting the tolerance; \
                 reporting the best iterate",
                fit.iterations
            );
        }
        serde_json::json!({
            "method": "npmle",
            "prior": serde_json::to_value(&fit.prior)?,
            "converged": fit.converged,
            "iterations": fit.iterations,
            "log_likelihood": fit.log_likelihood,
            "max_gradient_ratio": fit.max_gradient_ratio,
            "observations_used": observations.len(),
        })
    } else if args.naive {
        if args.family != "normal" {
            return Err(Error::invalid("--naive applies only to --family normal"));
        }
        let variance = naive_normal_variance(&observations)?;
        let prior = PriorSpec::Normal { tau: variance.sqrt() };
        serde_json::json!({
            "method": "naive_moments",
            "label": "naive",
            "note": "full-data method of moments (mean(x^2) - mean(sigma^2), floored); \
                     not targeted at the ranking-relevant tail",
            "prior": serde_json::to_value(&prior)?,
            "variance": variance,
            "observations_used": observations.len(),
        })
    } else {
        let family: ParametricFamily = args.family.parse()?;
        let cutoff = empirical_quantile(&observations, args.tail_quantile)?;
        let sample = TailSample::from_threshold(&observations, cutoff)?;
        let parameter = match family {
            ParametricFamily::Normal => fit_tail_normal(&sample)?,
            ParametricFamily::Exponential => fit_tail_exponential(&sample)?,
            ParametricFamily::Pareto => fit_tail_pareto(&sample)?,
        };
        let prior = match family {
            ParametricFamily::Normal => PriorSpec::Normal { tau: parameter },
            ParametricFamily::Exponential => PriorSpec::Exponential { rate: parameter },
            ParametricFamily::Pareto => {
                PriorSpec::Pareto { min: args.pareto_min, shape: parameter }
            }
        };
        prior.validate()?;
        serde_json::json!({
            "method": "tail_mle",
            "prior": serde_json::to_value(&prior)?,
            "parameter": parameter,
            "cutoff": cutoff,
            "tail_quantile": args.tail_quantile,
            "tail_observations": sample.observations.len(),
            "observations_used": observations.len(),
        })
    };

    let mut out = open_output(args.out.as_ref())?;
    serde_json::to_writer_pretty(&mut out, &document)?;
    out.write_all(b"\n")?;
    out.flush()?;
    if !quiet {
        eprintln!("fitted {} prior from {} observations", args.family, observations.len());
    }
    Ok(())
}
