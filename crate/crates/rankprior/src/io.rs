//! Dataset ingestion and tabular output.
//!
//! Input is CSV with a header row, in one of two schemas:
//!
//! * **estimates**: columns `id, estimate, stderr` — the estimate passes
//!   through as `x` with its standard error;
//! * **odds ratios**: columns `id, odds_ratio, ci_low, ci_high` — GWAS-style
//!   summary rows, transformed to `x = ln(odds_ratio)` with
//!   `sigma = (ln(ci_high) - ln(ci_low)) / 4` (a 95% interval is about four
//!   standard errors wide on the log scale).
//!
//! Column order does not matter, extra columns are ignored, and the schema
//! can be auto-detected from the header. Rows that violate the invariants
//! (`stderr > 0`; `ci_high > ci_low > 0`; unique non-empty ids; finite
//! numbers) are rejected individually with their line numbers; ingestion
//! fails outright only when no valid rows remain.
//!
//! Output writers mirror each other in CSV and JSON and are deterministic:
//! identical values produce byte-identical files. Floats are written in
//! shortest round-trip form, so re-ingesting a ranked table's
//! `(estimate, stderr)` columns reproduces posterior means exactly.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::isotax::IsotaxisCurve;
use crate::loss::LossTableRow;
use crate::posterior::RankedList;
use crate::prior::Observation;
use crate::sim::CellResult;

/// Positive floor applied to the naive method-of-moments variance
/// (`mean(x^2) - mean(sigma^2)` can come out negative on null-dominated
/// data).
pub const NAIVE_VARIANCE_FLOOR: f64 = 1e-12;

/// Input schema selector for [`ingest_str`] / [`ingest_path`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputFormat {
    /// Detect from the header: `estimate`/`stderr` columns vs
    /// `odds_ratio`/`ci_low`/`ci_high` columns.
    Auto,
    /// `id, estimate, stderr` rows.
    Estimates,
    /// `id, odds_ratio, ci_low, ci_high` rows.
    OddsRatios,
}

impl std::str::FromStr for InputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(InputFormat::Auto),
            "estimates" => Ok(InputFormat::Estimates),
            "odds-ratios" | "odds_ratios" => Ok(InputFormat::OddsRatios),
            other => Err(Error::invalid(format!(
                "unknown input format '{other}' (expected auto, estimates, or odds-ratios)"
            ))),
        }
    }
}

/// Output serialization selector shared by every writer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    /// Comma-separated values with a header row.
    Csv,
    /// A pretty-printed JSON array mirroring the CSV columns.
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => {
                Err(Error::invalid(format!("unknown output format '{other}' (expected csv or json)")))
            }
        }
    }
}

/// An observation tagged with its dataset id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledObservation {
    /// Unique row identifier from the input file.
    pub id: String,
    /// The parsed (and possibly transformed) observation.
    pub observation: Observation,
}

/// One rejected input row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowReject {
    /// 1-based line number in the input (the header is line 1).
    pub line: u64,
    /// Why the row was rejected.
    pub message: String,
}

/// Everything ingestion produces: the valid units, the per-row rejects,
/// and which schema was used.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestReport {
    /// Valid units in input order.
    pub units: Vec<LabeledObservation>,
    /// Rejected rows with line numbers and reasons.
    pub rejects: Vec<RowReject>,
    /// The schema the rows were parsed under (never `Auto`).
    pub format: InputFormat,
}

impl IngestReport {
    /// The bare observations, in input order.
    #[must_use]
    pub fn observations(&self) -> Vec<Observation> {
        self.units.iter().map(|u| u.observation).collect()
    }
}

/// Ingest a dataset file. See [`ingest_str`].
pub fn ingest_path(path: impl AsRef<Path>, format: InputFormat) -> Result<IngestReport> {
    let data = std::fs::read_to_string(path)?;
    ingest_str(&data, format)
}

/// Ingest CSV text into labeled observations, rejecting invalid rows
/// individually.
///
/// Errors are fatal only when the header is unusable or no row survives;
/// per-row problems land in [`IngestReport::rejects`] with 1-based line
/// numbers.
pub fn ingest_str(data: &str, format: InputFormat) -> Result<IngestReport> {
    let data = data.strip_prefix('\u{feff}').unwrap_or(data);
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(data.as_bytes());

    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let id_col = col("id")
        .ok_or_else(|| Error::InvalidData("header has no 'id' column".to_string()))?;
    let estimate_cols = col("estimate").zip(col("stderr"));
    let or_cols = match (col("odds_ratio"), col("ci_low"), col("ci_high")) {
        (Some(a), Some(b), Some(c)) => Some((a, b, c)),
        _ => None,
    };
    let resolved = match format {
        InputFormat::Estimates => {
            estimate_cols.ok_or_else(|| {
                Error::InvalidData("estimates format needs 'estimate' and 'stderr' columns".to_string())
            })?;
            InputFormat::Estimates
        }
        InputFormat::OddsRatios => {
            or_cols.ok_or_else(|| {
                Error::InvalidData(
                    "odds-ratios format needs 'odds_ratio', 'ci_low', and 'ci_high' columns"
                        .to_string(),
                )
            })?;
            InputFormat::OddsRatios
        }
        InputFormat::Auto => match (estimate_cols, or_cols) {
            (Some(_), None) => InputFormat::Estimates,
            (None, Some(_)) => InputFormat::OddsRatios,
            (Some(_), Some(_)) => {
                return Err(Error::InvalidData(
                    "header matches both schemas; pass the format explicitly".to_string(),
                ))
            }
            (None, None) => {
                return Err(Error::InvalidData(
                    "header matches neither schema: need (estimate, stderr) or (odds_ratio, ci_low, ci_high)"
                        .to_string(),
                ))
            }
        },
    };

    let mut units = Vec::new();
    let mut rejects = Vec::new();
    let mut seen: HashMap<String, u64> = HashMap::new();
    for record in reader.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, csv::Position::line);
                rejects.push(RowReject { line, message: format!("unparseable row: {e}") });
                continue;
            }
        };
        let line = record.position().map_or(0, csv::Position::line);
        if record.iter().all(str::is_empty) {
            continue; // skip blank lines silently
        }
        match parse_row(&record, id_col, estimate_cols, or_cols, resolved, &mut seen, line) {
            Ok(unit) => units.push(unit),
            Err(message) => rejects.push(RowReject { line, message }),
        }
    }

    if units.is_empty() {
        return Err(Error::InvalidData(format!(
            "no valid rows ({} rejected); first problem: {}",
            rejects.len(),
            rejects.first().map_or("file has no data rows".to_string(), |r| {
                format!("line {}: {}", r.line, r.message)
            })
        )));
    }
    Ok(IngestReport { units, rejects, format: resolved })
}

/// Parse and validate one record; the `Err` string becomes the reject
/// message.
fn parse_row(
    record: &csv::StringRecord,
    id_col: usize,
    estimate_cols: Option<(usize, usize)>,
    or_cols: Option<(usize, usize, usize)>,
    resolved: InputFormat,
    seen: &mut HashMap<String, u64>,
    line: u64,
) -> std::result::Result<LabeledObservation, String> {
    let field = |i: usize, name: &str| {
        record
            .get(i)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| format!("missing '{name}' field"))
    };
    let number = |i: usize, name: &str| {
        field(i, name)?
            .parse::<f64>()
            .map_err(|_| format!("'{name}' is not a number: '{}'", record.get(i).unwrap_or("")))
    };

    let id = field(id_col, "id")?.to_string();
    if let Some(first) = seen.get(&id) {
        return Err(format!("duplicate id '{id}' (first seen on line {first})"));
    }

    let observation = match resolved {
        InputFormat::Estimates => {
            let (x_col, se_col) = estimate_cols.expect("resolved implies columns");
            let x = number(x_col, "estimate")?;
            let se = number(se_col, "stderr")?;
            if !x.is_finite() {
                return Err(format!("estimate must be finite, got {x}"));
            }
            if !(se.is_finite() && se > 0.0) {
                return Err(format!("stderr must be finite and > 0, got {se}"));
            }
            Observation::new(x, se).map_err(|e| e.to_string())?
        }
        InputFormat::OddsRatios => {
            let (or_col, lo_col, hi_col) = or_cols.expect("resolved implies columns");
            let or = number(or_col, "odds_ratio")?;
            let lo = number(lo_col, "ci_low")?;
            let hi = number(hi_col, "ci_high")?;
            if !(or.is_finite() && or > 0.0) {
                return Err(format!("odds_ratio must be finite and > 0, got {or}"));
            }
            if !(lo.is_finite() && lo > 0.0) {
                return Err(format!("ci_low must be finite and > 0, got {lo}"));
            }
            if !(hi.is_finite() && hi > lo) {
                return Err(format!("ci_high must be finite and exceed ci_low, got {hi} vs {lo}"));
            }
            Observation::new(or.ln(), (hi.ln() - lo.ln()) / 4.0).map_err(|e| e.to_string())?
        }
        InputFormat::Auto => unreachable!("format resolved before row parsing"),
    };
    seen.insert(id.clone(), line);
    Ok(LabeledObservation { id, observation })
}

/// Naive full-data method-of-moments variance of the latent effects under
/// a normal working model: `mean(x^2) - mean(sigma^2)`, floored at
/// [`NAIVE_VARIANCE_FLOOR`]. "Naive" because it uses every observation
/// rather than the ranking-relevant tail; reports should carry the label
/// through.
pub fn naive_normal_variance(obs: &[Observation]) -> Result<f64> {
    if obs.is_empty() {
        return Err(Error::invalid("variance of an empty dataset"));
    }
    let n = obs.len() as f64;
    let mean_x2 = obs.iter().map(|o| o.x * o.x).sum::<f64>() / n;
    let mean_s2 = obs.iter().map(|o| o.sigma * o.sigma).sum::<f64>() / n;
    Ok((mean_x2 - mean_s2).max(NAIVE_VARIANCE_FLOOR))
}

// ---------------------------------------------------------------------------
// Output writers
// ---------------------------------------------------------------------------

/// One row of a ranked table. The `estimate`/`stderr` column names are
/// deliberately those of the input schema so a ranked file can be
/// re-ingested directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedRow {
    /// Unit id from the input.
    pub id: String,
    /// Observed estimate `x`.
    pub estimate: f64,
    /// Its standard error.
    pub stderr: f64,
    /// Posterior-mean score under the estimating prior.
    pub posterior_mean: f64,
    /// 1-based rank (1 = largest posterior mean).
    pub rank: usize,
}

/// Assemble ranked rows (in rank order) from labeled units and their
/// ranking.
pub fn ranked_rows(units: &[LabeledObservation], ranked: &RankedList) -> Result<Vec<RankedRow>> {
    if units.len() != ranked.len() {
        return Err(Error::invalid(format!(
            "{} units but {} ranked scores",
            units.len(),
            ranked.len()
        )));
    }
    Ok(ranked
        .order
        .iter()
        .enumerate()
        .map(|(k, &i)| RankedRow {
            id: units[i].id.clone(),
            estimate: units[i].observation.x,
            stderr: units[i].observation.sigma,
            posterior_mean: ranked.scores[k],
            rank: k + 1,
        })
        .collect())
}

/// One exported curve point (long format: one row per grid point).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    /// The curve's common posterior-mean score.
    #[serde(rename = "level_C")]
    pub level_c: f64,
    /// Top fraction the curve separates, when it came from a rank
    /// threshold.
    pub rank_fraction: Option<f64>,
    /// Observation value on the curve.
    pub x: f64,
    /// Sampling variance on the curve.
    pub variance: f64,
}

/// Flatten curves to exportable rows, preserving curve and point order.
#[must_use]
pub fn curve_rows(curves: &[IsotaxisCurve]) -> Vec<CurveRow> {
    curves
        .iter()
        .flat_map(|c| {
            c.points.iter().map(|&(x, variance)| CurveRow {
                level_c: c.level,
                rank_fraction: c.rank_fraction,
                x,
                variance,
            })
        })
        .collect()
}

/// One exported curve point in sigma space (the optional noise-level view
/// of the same curves).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSigmaRow {
    /// The curve's common posterior-mean score.
    #[serde(rename = "level_C")]
    pub level_c: f64,
    /// Top fraction the curve separates, when it came from a rank
    /// threshold.
    pub rank_fraction: Option<f64>,
    /// Observation value on the curve.
    pub x: f64,
    /// Noise level (standard error) on the curve.
    pub sigma: f64,
}

/// Flatten curves to sigma-space rows (`sigma = sqrt(variance)`).
#[must_use]
pub fn curve_rows_sigma(curves: &[IsotaxisCurve]) -> Vec<CurveSigmaRow> {
    curves
        .iter()
        .flat_map(|c| {
            c.points.iter().map(|&(x, variance)| CurveSigmaRow {
                level_c: c.level,
                rank_fraction: c.rank_fraction,
                x,
                sigma: variance.sqrt(),
            })
        })
        .collect()
}

/// Write any serializable row collection in the chosen format.
pub fn write_rows<T: Serialize, W: Write>(
    rows: &[T],
    format: OutputFormat,
    writer: W,
) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut csv_writer = csv::Writer::from_writer(writer);
            for row in rows {
                csv_writer.serialize(row)?;
            }
            csv_writer.flush()?;
            Ok(())
        }
        OutputFormat::Json => {
            let mut writer = writer;
            serde_json::to_writer_pretty(&mut writer, rows)?;
            writer.write_all(b"\n")?;
            Ok(())
        }
    }
}

/// Write a ranked table.
pub fn write_ranked<W: Write>(rows: &[RankedRow], format: OutputFormat, writer: W) -> Result<()> {
    write_rows(rows, format, writer)
}

/// Write exported curves (`level_C, rank_fraction, x, variance`).
pub fn write_curves<W: Write>(
    curves: &[IsotaxisCurve],
    format: OutputFormat,
    writer: W,
) -> Result<()> {
    write_rows(&curve_rows(curves), format, writer)
}

/// Write exported curves in sigma space
/// (`level_C, rank_fraction, x, sigma`).
pub fn write_curves_sigma<W: Write>(
    curves: &[IsotaxisCurve],
    format: OutputFormat,
    writer: W,
) -> Result<()> {
    write_rows(&curve_rows_sigma(curves), format, writer)
}

/// Write a reference loss table.
pub fn write_loss_table<W: Write>(
    rows: &[LossTableRow],
    format: OutputFormat,
    writer: W,
) -> Result<()> {
    write_rows(rows, format, writer)
}

/// Write simulation cell results.
pub fn write_cells<W: Write>(
    cells: &[CellResult],
    format: OutputFormat,
    writer: W,
) -> Result<()> {
    write_rows(cells, format, writer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::posterior::rank_units;
    use crate::prior::PriorSpec;

    const ESTIMATES: &str = "id,estimate,stderr\n\
                             snp1,0.5,0.1\n\
                             snp2,-0.2,0.3\n\
                             snp3,1.1,0.05\n";

    #[test]
    fn estimate_rows_pass_through() {
        let report = ingest_str(ESTIMATES, InputFormat::Auto).unwrap();
        assert_eq!(report.format, InputFormat::Estimates);
        assert!(report.rejects.is_empty());
        assert_eq!(report.units.len(), 3);
        assert_eq!(report.units[0].id, "snp1");
        assert_eq!(report.units[0].observation, Observation::new(0.5, 0.1).unwrap());
    }

    #[test]
    fn odds_ratio_rows_are_log_transformed() {
        let data = "id,odds_ratio,ci_low,ci_high\n\
                    a,1.2,1.1,1.31\n\
                    b,1.0,0.9,1.1111111111111112\n";
        let report = ingest_str(data, InputFormat::Auto).unwrap();
        assert_eq!(report.format, InputFormat::OddsRatios);
        let oa = report.units[0].observation;
        // x = ln 1.2; sigma = (ln 1.31 - ln 1.1)/4 = 0.0436792394 (quarter
        // of the log-scale CI width).
        assert!((oa.x - 0.182_321_556_793_954_6).abs() < 1e-15);
        assert!((oa.sigma - 0.043_679_239_352_183_84).abs() < 1e-12);
        // A unit odds ratio is exactly zero on the log scale.
        assert_eq!(report.units[1].observation.x, 0.0);
    }

    #[test]
    fn schema_detection_and_explicit_mismatch() {
        assert!(matches!(
            ingest_str("id,stderr\nu,1\n", InputFormat::Auto),
            Err(Error::InvalidData(_))
        ));
        let both = "id,estimate,stderr,odds_ratio,ci_low,ci_high\nu,1,1,2,1,3\n";
        assert!(matches!(ingest_str(both, InputFormat::Auto), Err(Error::InvalidData(_))));
        // ...but an explicit format disambiguates.
        let report = ingest_str(both, InputFormat::Estimates).unwrap();
        assert_eq!(report.units[0].observation, Observation::new(1.0, 1.0).unwrap());
        let report = ingest_str(both, InputFormat::OddsRatios).unwrap();
        assert!((report.units[0].observation.x - 2f64.ln()).abs() < 1e-15);

        assert!(ingest_str("name,estimate,stderr\nu,1,1\n", InputFormat::Auto).is_err());
        assert!(ingest_str(ESTIMATES, InputFormat::OddsRatios).is_err());
    }

    #[test]
    fn bad_rows_are_rejected_with_line_numbers() {
        let data = "id,estimate,stderr\n\
                    ok1,0.5,0.1\n\
                    bad_float,abc,0.1\n\
                    bad_se,0.2,0\n\
                    ,0.3,0.1\n\
                    ok1,0.9,0.2\n\
                    short_row,0.4\n\
                    nan,NaN,0.1\n\
                    ok2,-1.0,0.25\n";
        let report = ingest_str(data, InputFormat::Auto).unwrap();
        assert_eq!(report.units.len(), 2);
        assert_eq!(report.units[1].id, "ok2");
        let lines: Vec<u64> = report.rejects.iter().map(|r| r.line).collect();
        assert_eq!(lines, vec![3, 4, 5, 6, 7, 8]);
        let messages: Vec<&str> = report.rejects.iter().map(|r| r.message.as_str()).collect();
        assert!(messages[0].contains("not a number"), "{messages:?}");
        assert!(messages[1].contains("stderr"), "{messages:?}");
        assert!(messages[2].contains("missing 'id'"), "{messages:?}");
        assert!(messages[3].contains("duplicate id 'ok1'"), "{messages:?}");
        assert!(messages[3].contains("line 2"), "{messages:?}");
        assert!(messages[4].contains("missing 'stderr'"), "{messages:?}");
        assert!(messages[5].contains("finite"), "{messages:?}");
    }

    #[test]
    fn odds_ratio_invariants_are_enforced_per_row() {
        let data = "id,odds_ratio,ci_low,ci_high\n\
                    neg_or,-1,0.5,2\n\
                    neg_lo,1.2,0,2\n\
                    flipped,1.2,1.4,1.1\n\
                    ok,2.0,1.5,2.5\n";
        let report = ingest_str(data, InputFormat::Auto).unwrap();
        assert_eq!(report.units.len(), 1);
        assert_eq!(report.rejects.len(), 3);
        assert!(report.rejects[0].message.contains("odds_ratio"));
        assert!(report.rejects[1].message.contains("ci_low"));
        assert!(report.rejects[2].message.contains("ci_high"));
    }

    #[test]
    fn no_valid_rows_is_fatal() {
        let data = "id,estimate,stderr\nu1,x,1\nu2,y,1\n";
        let err = ingest_str(data, InputFormat::Auto).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("no valid rows (2 rejected)"), "{msg}");
        assert!(msg.contains("line 2"), "{msg}");

        assert!(ingest_str("id,estimate,stderr\n", InputFormat::Auto).is_err());
    }

    #[test]
    fn extra_columns_blank_lines_and_bom_are_tolerated() {
        let data = "\u{feff}chrom,id,pos,estimate,stderr,pvalue\n\
                    1,rs1,100,0.5,0.1,0.03\n\
                    \n\
                    2,rs2,200,0.7,0.2,0.5\n";
        let report = ingest_str(data, InputFormat::Auto).unwrap();
        assert_eq!(report.units.len(), 2);
        assert!(report.rejects.is_empty());
        assert_eq!(report.units[0].id, "rs1");
    }

    #[test]
    fn naive_variance_is_moment_matched_and_floored() {
        let obs = vec![
            Observation::new(2.0, 1.0).unwrap(),
            Observation::new(-1.0, 0.5).unwrap(),
        ];
        // mean(x^2) = 2.5, mean(sigma^2) = 0.625.
        assert!((naive_normal_variance(&obs).unwrap() - 1.875).abs() < 1e-15);

        let null = vec![Observation::new(0.1, 1.0).unwrap()];
        assert_eq!(naive_normal_variance(&null).unwrap(), NAIVE_VARIANCE_FLOOR);
        assert!(naive_normal_variance(&[]).is_err());
    }

    #[test]
    fn ranked_table_round_trips_through_csv() {
        let prior = PriorSpec::Normal { tau: 0.8 };
        let report = ingest_str(ESTIMATES, InputFormat::Auto).unwrap();
        let ranked = rank_units(&prior, &report.observations()).unwrap();
        let rows = ranked_rows(&report.units, &ranked).unwrap();
        assert_eq!(rows[0].rank, 1);
        // Scores in the table are descending.
        assert!(rows.windows(2).all(|w| w[0].posterior_mean >= w[1].posterior_mean));

        let mut csv_bytes = Vec::new();
        write_ranked(&rows, OutputFormat::Csv, &mut csv_bytes).unwrap();
        let text = String::from_utf8(csv_bytes).unwrap();
        assert!(text.starts_with("id,estimate,stderr,posterior_mean,rank\n"));

        // Re-ingest the output (extra columns ignored) and re-rank:
        // posterior means must reproduce bit-for-bit.
        let again = ingest_str(&text, InputFormat::Auto).unwrap();
        assert!(again.rejects.is_empty());
        let ranked_again = rank_units(&prior, &again.observations()).unwrap();
        assert_eq!(ranked_again.scores, {
            let mut s = ranked.scores.clone();
            s.sort_by(|a, b| b.total_cmp(a));
            s
        });
        let rows_again = ranked_rows(&again.units, &ranked_again).unwrap();
        assert_eq!(
            rows.iter().map(|r| (r.id.as_str(), r.posterior_mean)).collect::<Vec<_>>(),
            rows_again.iter().map(|r| (r.id.as_str(), r.posterior_mean)).collect::<Vec<_>>()
        );
    }

    #[test]
    fn curve_rows_use_the_documented_columns() {
        let curves = vec![
            IsotaxisCurve {
                level: 1.5,
                points: vec![(1.5, 0.0), (1.8, 0.2)],
                rank_fraction: Some(0.1),
                skipped_points: 0,
            },
            IsotaxisCurve {
                level: 0.5,
                points: vec![(0.5, 0.0)],
                rank_fraction: None,
                skipped_points: 0,
            },
        ];
        let mut bytes = Vec::new();
        write_curves(&curves, OutputFormat::Csv, &mut bytes).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("level_C,rank_fraction,x,variance"));
        assert_eq!(lines.next(), Some("1.5,0.1,1.5,0.0"));
        assert_eq!(lines.next(), Some("1.5,0.1,1.8,0.2"));
        // Absent rank fraction is an empty field, not a sentinel.
        assert_eq!(lines.next(), Some("0.5,,0.5,0.0"));

        let mut json = Vec::new();
        write_curves(&curves, OutputFormat::Json, &mut json).unwrap();
        let value: serde_json::Value = serde_json::from_slice(&json).unwrap();
        assert_eq!(value.as_array().unwrap().len(), 3);
        assert_eq!(value[0]["level_C"], 1.5);
        assert!(value[2]["rank_fraction"].is_null());

        // Sigma-space view: same points with sigma = sqrt(variance).
        let mut sig = Vec::new();
        write_curves_sigma(&curves, OutputFormat::Csv, &mut sig).unwrap();
        let text = String::from_utf8(sig).unwrap();
        assert!(text.starts_with("level_C,rank_fraction,x,sigma\n"));
        assert!(text.contains(&format!("1.5,0.1,1.8,{}", 0.2f64.sqrt())));
    }

    #[test]
    fn writers_are_deterministic_and_formats_mirror_each_other() {
        let report = ingest_str(ESTIMATES, InputFormat::Auto).unwrap();
        let prior = PriorSpec::Exponential { rate: 1.0 };
        let ranked = rank_units(&prior, &report.observations()).unwrap();
        let rows = ranked_rows(&report.units, &ranked).unwrap();

        let mut a = Vec::new();
        let mut b = Vec::new();
        write_ranked(&rows, OutputFormat::Csv, &mut a).unwrap();
        write_ranked(&rows, OutputFormat::Csv, &mut b).unwrap();
        assert_eq!(a, b);

        let mut j = Vec::new();
        write_ranked(&rows, OutputFormat::Json, &mut j).unwrap();
        let parsed: Vec<RankedRow> = serde_json::from_slice(&j).unwrap();
        assert_eq!(parsed, rows);
    }

    #[test]
    fn format_flags_parse() {
        assert_eq!("auto".parse::<InputFormat>().unwrap(), InputFormat::Auto);
        assert_eq!("odds-ratios".parse::<InputFormat>().unwrap(), InputFormat::OddsRatios);
        assert!("tsv".parse::<InputFormat>().is_err());
        assert_eq!("csv".parse::<OutputFormat>().unwrap(), OutputFormat::Csv);
        assert_eq!("json".parse::<OutputFormat>().unwrap(), OutputFormat::Json);
        assert!("yaml".parse::<OutputFormat>().is_err());
    }
}
