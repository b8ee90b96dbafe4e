//! Self-contained SVG figures: a scatter of observations in
//! `(estimate, variance)` space with overlaid isotaxis curves and an
//! optional significance curve.
//!
//! The output is a single static SVG document — fixed viewBox, no external
//! assets, no scripts — whose axis ranges are driven by the data. Rendering
//! is deterministic: the same inputs produce byte-identical output.

use crate::error::{Error, Result};
use crate::isotax::{significance_curve, IsotaxisCurve};
use crate::prior::Observation;

/// Colorblind-safe stroke palette for isotaxis curves, cycled in order.
const CURVE_COLORS: [&str; 6] =
    ["#0072b2", "#d55e00", "#009e73", "#cc79a7", "#e69f00", "#56b4e9"];

/// Layout and labeling options for [`scatter_figure`].
#[derive(Debug, Clone, PartialEq)]
pub struct FigureOptions {
    /// ViewBox width in pixels.
    pub width: f64,
    /// ViewBox height in pixels.
    pub height: f64,
    /// Optional title drawn above the plot.
    pub title: Option<String>,
    /// Horizontal-axis label.
    pub x_label: String,
    /// Vertical-axis label.
    pub y_label: String,
    /// Scatter points beyond this count are thinned by a deterministic
    /// stride so very large datasets stay renderable; the figure notes how
    /// many points were drawn.
    pub max_points: usize,
    /// When set, overlay the two-sided normal significance curve
    /// `x = z * sigma` at this level (e.g. `0.95`) as a dashed line.
    pub significance_level: Option<f64>,
}

impl Default for FigureOptions {
    fn default() -> Self {
        FigureOptions {
            width: 800.0,
            height: 600.0,
            title: None,
            x_label: "estimate".to_string(),
            y_label: "variance".to_string(),
            max_points: 20_000,
            significance_level: None,
        }
    }
}

/// Render a scatter of the observations at `(x, sigma^2)` with the given
/// isotaxis curves overlaid, as a complete SVG document.
///
/// Axis ranges cover every observation and curve point with a small pad.
/// Curves are labeled by their top fraction when they came from a rank
/// threshold, otherwise by their score level.
pub fn scatter_figure(
    observations: &[Observation],
    curves: &[IsotaxisCurve],
    options: &FigureOptions,
) -> Result<String> {
    if !(options.width.is_finite() && options.width > 100.0)
        || !(options.height.is_finite() && options.height > 100.0)
    {
        return Err(Error::invalid(format!(
            "figure dimensions must exceed 100x100 pixels, got {}x{}",
            options.width, options.height
        )));
    }
    if options.max_points == 0 {
        return Err(Error::invalid("max_points must be at least 1"));
    }

    // Data-driven ranges over everything that will be drawn.
    let mut xs: Vec<f64> = Vec::new();
    let mut vs: Vec<f64> = Vec::new();
    for o in observations {
        xs.push(o.x);
        vs.push(o.sigma * o.sigma);
    }
    for c in curves {
        for &(x, v) in &c.points {
            xs.push(x);
            vs.push(v);
        }
    }
    if xs.is_empty() {
        return Err(Error::invalid(
            "figure needs at least one observation or curve point",
        ));
    }
    let (x_lo, x_hi) = padded_range(&xs);
    let (v_lo, v_hi) = {
        let (lo, hi) = padded_range(&vs);
        // Variance is non-negative; do not pad below zero.
        (lo.max(0.0), hi)
    };

    // Layout.
    let margin_top = if options.title.is_some() { 44.0 } else { 20.0 };
    let (margin_left, margin_right, margin_bottom) = (72.0, 20.0, 52.0);
    let plot_w = options.width - margin_left - margin_right;
    let plot_h = options.height - margin_top - margin_bottom;
    let px = |x: f64| margin_left + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let py = |v: f64| margin_top + (1.0 - (v - v_lo) / (v_hi - v_lo)) * plot_h;

    let mut out = String::with_capacity(4096);
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {w} {h}\" \
         width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\">\n",
        w = fmt_px(options.width),
        h = fmt_px(options.height),
    ));
    out.push_str(&format!(
        "<rect width=\"{}\" height=\"{}\" fill=\"#ffffff\"/>\n",
        fmt_px(options.width),
        fmt_px(options.height)
    ));
    if let Some(title) = &options.title {
        out.push_str(&format!(
            "<text x=\"{}\" y=\"26\" font-size=\"16\" text-anchor=\"middle\" fill=\"#1a1a1a\">{}</text>\n",
            fmt_px(margin_left + plot_w / 2.0),
            escape_text(title)
        ));
    }

    render_axes(
        &mut out,
        (x_lo, x_hi),
        (v_lo, v_hi),
        (margin_left, margin_top, plot_w, plot_h),
        options,
    );

    out.push_str(&format!(
        "<clipPath id=\"plot-area\"><rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\"/></clipPath>\n",
        fmt_px(margin_left),
        fmt_px(margin_top),
        fmt_px(plot_w),
        fmt_px(plot_h)
    ));
    out.push_str("<g clip-path=\"url(#plot-area)\">\n");

    // Scatter, thinned by stride when too large.
    let stride = observations.len().div_ceil(options.max_points).max(1);
    let mut drawn = 0usize;
    for o in observations.iter().step_by(stride) {
        out.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"2.5\" fill=\"#4d4d4d\" fill-opacity=\"0.45\"/>\n",
            fmt_px(px(o.x)),
            fmt_px(py(o.sigma * o.sigma))
        ));
        drawn += 1;
    }

    // Significance overlay (dashed), computed on a fine grid of the
    // plotted variance range.
    if let Some(level) = options.significance_level {
        let grid: Vec<f64> =
            (0..=200).map(|i| v_lo + (v_hi - v_lo) * i as f64 / 200.0).collect();
        let sig = significance_curve(&grid, level)?;
        out.push_str(&format!(
            "<path d=\"{}\" fill=\"none\" stroke=\"#555555\" stroke-width=\"1.5\" stroke-dasharray=\"6 4\"/>\n",
            path_data(&sig, &px, &py)
        ));
    }

    // Isotaxis curves.
    for (i, curve) in curves.iter().enumerate() {
        if curve.points.is_empty() {
            continue;
        }
        out.push_str(&format!(
            "<path d=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>\n",
            path_data(&curve.points, &px, &py),
            CURVE_COLORS[i % CURVE_COLORS.len()]
        ));
    }
    out.push_str("</g>\n");

    // Curve labels, outside the clip so they stay readable at the edge.
    for (i, curve) in curves.iter().enumerate() {
        let Some(&(x, v)) = curve.points.last() else { continue };
        let label = match curve.rank_fraction {
            Some(f) => format!("top {}%", fmt_sig(f * 100.0)),
            None => format!("C = {}", fmt_sig(curve.level)),
        };
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{}\">{}</text>\n",
            fmt_px((px(x) + 5.0).min(options.width - 60.0)),
            fmt_px((py(v) - 5.0).max(12.0)),
            CURVE_COLORS[i % CURVE_COLORS.len()],
            escape_text(&label)
        ));
    }
    if let Some(level) = options.significance_level {
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"#555555\">{}% significance</text>\n",
            fmt_px(margin_left + 8.0),
            fmt_px(margin_top + 16.0),
            fmt_sig(level * 100.0)
        ));
    }

    // Footnote when the scatter was thinned.
    if stride > 1 {
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"10\" fill=\"#888888\" text-anchor=\"end\">showing {} of {} points</text>\n",
            fmt_px(options.width - 8.0),
            fmt_px(options.height - 6.0),
            drawn,
            observations.len()
        ));
    }

    out.push_str("</svg>\n");
    Ok(out)
}

/// Axes, ticks, tick labels, and axis titles.
fn render_axes(
    out: &mut String,
    (x_lo, x_hi): (f64, f64),
    (v_lo, v_hi): (f64, f64),
    (left, top, plot_w, plot_h): (f64, f64, f64, f64),
    options: &FigureOptions,
) {
    let bottom = top + plot_h;
    let right = left + plot_w;
    out.push_str(&format!(
        "<line x1=\"{l}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"#1a1a1a\"/>\n<line x1=\"{l}\" y1=\"{t}\" x2=\"{l}\" y2=\"{b}\" stroke=\"#1a1a1a\"/>\n",
        l = fmt_px(left),
        r = fmt_px(right),
        t = fmt_px(top),
        b = fmt_px(bottom)
    ));

    let (x_ticks, x_step) = nice_ticks(x_lo, x_hi, 6);
    for &t in &x_ticks {
        let x = left + (t - x_lo) / (x_hi - x_lo) * plot_w;
        out.push_str(&format!(
            "<line x1=\"{x}\" y1=\"{b}\" x2=\"{x}\" y2=\"{b2}\" stroke=\"#1a1a1a\"/>\n<text x=\"{x}\" y=\"{ly}\" font-size=\"11\" text-anchor=\"middle\" fill=\"#1a1a1a\">{label}</text>\n",
            x = fmt_px(x),
            b = fmt_px(bottom),
            b2 = fmt_px(bottom + 5.0),
            ly = fmt_px(bottom + 18.0),
            label = fmt_tick(t, x_step)
        ));
    }
    let (v_ticks, v_step) = nice_ticks(v_lo, v_hi, 6);
    for &t in &v_ticks {
        let y = top + (1.0 - (t - v_lo) / (v_hi - v_lo)) * plot_h;
        out.push_str(&format!(
            "<line x1=\"{l2}\" y1=\"{y}\" x2=\"{l}\" y2=\"{y}\" stroke=\"#1a1a1a\"/>\n<text x=\"{lx}\" y=\"{ty}\" font-size=\"11\" text-anchor=\"end\" fill=\"#1a1a1a\">{label}</text>\n",
            l = fmt_px(left),
            l2 = fmt_px(left - 5.0),
            y = fmt_px(y),
            lx = fmt_px(left - 8.0),
            ty = fmt_px(y + 4.0),
            label = fmt_tick(t, v_step)
        ));
    }

    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\" fill=\"#1a1a1a\">{}</text>\n",
        fmt_px(left + plot_w / 2.0),
        fmt_px(bottom + 40.0),
        escape_text(&options.x_label)
    ));
    out.push_str(&format!(
        "<text x=\"18\" y=\"{mid}\" font-size=\"13\" text-anchor=\"middle\" fill=\"#1a1a1a\" transform=\"rotate(-90 18 {mid})\">{label}</text>\n",
        mid = fmt_px(top + plot_h / 2.0),
        label = escape_text(&options.y_label)
    ));
}

/// Min/max of the values with a 5% pad on each side; a degenerate range is
/// widened around its value so the scales stay usable.
fn padded_range(values: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if hi - lo > 0.0 {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { 0.5 * lo.abs() };
        (lo - pad, hi + pad)
    }
}

/// Round tick positions covering `[lo, hi]` with a 1-2-5 step sized for
/// about `target` ticks; returns the ticks and the step (for label
/// precision).
fn nice_ticks(lo: f64, hi: f64, target: usize) -> (Vec<f64>, f64) {
    let span = hi - lo;
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let step = mag
        * if norm <= 1.0 {
            1.0
        } else if norm <= 2.0 {
            2.0
        } else if norm <= 5.0 {
            5.0
        } else {
            10.0
        };
    let mut ticks = Vec::new();
    let mut t = (lo / step).ceil() * step;
    while t <= hi + 1e-9 * span {
        // Snap near-zero ticks so the label is "0", not "1.2e-17".
        ticks.push(if t.abs() < 1e-9 * span { 0.0 } else { t });
        t += step;
    }
    (ticks, step)
}

/// Pixel coordinates at fixed 2-decimal precision (deterministic output).
fn fmt_px(v: f64) -> String {
    format!("{v:.2}")
}

/// Tick label with just enough decimals for the step size.
fn fmt_tick(v: f64, step: f64) -> String {
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let v = if v == 0.0 { 0.0 } else { v }; // normalize -0.0
    format!("{v:.decimals$}")
}

/// Short significant-figure format for labels ("1.3", "10", "0.001812").
fn fmt_sig(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" { "0".to_string() } else { s.to_string() }
}

/// Polyline path data in pixel space.
fn path_data(points: &[(f64, f64)], px: &dyn Fn(f64) -> f64, py: &dyn Fn(f64) -> f64) -> String {
    let mut d = String::with_capacity(points.len() * 16);
    for (i, &(x, v)) in points.iter().enumerate() {
        d.push_str(if i == 0 { "M" } else { " L" });
        d.push_str(&format!("{},{}", fmt_px(px(x)), fmt_px(py(v))));
    }
    d
}

/// Minimal XML text escaping for labels and titles.
fn escape_text(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isotax::isotaxis_curve;
    use crate::prior::PriorSpec;
    use crate::rng::{open_unit, stream_rng};

    fn sample_observations(n: usize, seed: u64) -> Vec<Observation> {
        let mut rng = stream_rng(seed, 0);
        (0..n)
            .map(|_| {
                let x = 4.0 * open_unit(&mut rng) - 2.0;
                let sigma = 0.05 + 0.3 * open_unit(&mut rng);
                Observation::new(x, sigma).unwrap()
            })
            .collect()
    }

    fn sample_curves() -> Vec<IsotaxisCurve> {
        let prior = PriorSpec::Normal { tau: 1.0 };
        let grid: Vec<f64> = (0..=20).map(|i| 0.12 * (i as f64 / 20.0)).collect();
        vec![
            isotaxis_curve(&prior, 0.5, &grid).unwrap(),
            isotaxis_curve(&prior, 1.5, &grid).unwrap().with_rank_fraction(0.1),
        ]
    }

    #[test]
    fn renders_a_complete_document_with_all_layers() {
        let obs = sample_observations(40, 21);
        let curves = sample_curves();
        let options = FigureOptions {
            title: Some("ranking thresholds".to_string()),
            significance_level: Some(0.95),
            ..FigureOptions::default()
        };
        let svg = scatter_figure(&obs, &curves, &options).unwrap();
        assert!(svg.starts_with("<svg "));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("viewBox=\"0 0 800.00 600.00\""));
        assert_eq!(svg.matches("<circle ").count(), 40);
        // Two solid curves + one dashed significance curve.
        assert_eq!(svg.matches("<path ").count(), 3);
        assert_eq!(svg.matches("stroke-dasharray").count(), 1);
        assert!(svg.contains("ranking thresholds"));
        assert!(svg.contains("C = 0.5"));
        assert!(svg.contains("top 10%"));
        assert!(svg.contains("95% significance"));
        assert!(svg.contains(">estimate</text>"));
        assert!(svg.contains(">variance</text>"));
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
        // Self-contained: no scripts, no external references.
        assert!(!svg.contains("<script") && !svg.contains("http://") || svg.contains("xmlns"));
        assert!(!svg.contains("href"));
    }

    #[test]
    fn output_is_deterministic() {
        let obs = sample_observations(25, 22);
        let curves = sample_curves();
        let options = FigureOptions { significance_level: Some(0.9), ..FigureOptions::default() };
        let a = scatter_figure(&obs, &curves, &options).unwrap();
        let b = scatter_figure(&obs, &curves, &options).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn large_datasets_are_thinned_deterministically() {
        let obs = sample_observations(5000, 23);
        let options = FigureOptions { max_points: 1000, ..FigureOptions::default() };
        let svg = scatter_figure(&obs, &[], &options).unwrap();
        // Stride ceil(5000/1000) = 5 draws every 5th point.
        assert_eq!(svg.matches("<circle ").count(), 1000);
        assert!(svg.contains("showing 1000 of 5000 points"));
    }

    #[test]
    fn degenerate_and_empty_inputs() {
        // A single observation still renders with a widened range.
        let one = vec![Observation::new(1.0, 0.1).unwrap()];
        let svg = scatter_figure(&one, &[], &FigureOptions::default()).unwrap();
        assert_eq!(svg.matches("<circle ").count(), 1);
        assert!(!svg.contains("NaN"));

        assert!(scatter_figure(&[], &[], &FigureOptions::default()).is_err());
        // Curves alone are enough to define ranges.
        let svg = scatter_figure(&[], &sample_curves(), &FigureOptions::default()).unwrap();
        assert_eq!(svg.matches("<circle ").count(), 0);
        assert_eq!(svg.matches("<path ").count(), 2);
    }

    #[test]
    fn invalid_options_are_rejected() {
        let obs = sample_observations(5, 24);
        let tiny = FigureOptions { width: 50.0, ..FigureOptions::default() };
        assert!(scatter_figure(&obs, &[], &tiny).is_err());
        let zero = FigureOptions { max_points: 0, ..FigureOptions::default() };
        assert!(scatter_figure(&obs, &[], &zero).is_err());
        let bad_level =
            FigureOptions { significance_level: Some(1.5), ..FigureOptions::default() };
        assert!(scatter_figure(&obs, &[], &bad_level).is_err());
    }

    #[test]
    fn points_land_inside_the_plot_area() {
        // With the default layout the plot rect is x in [72, 780],
        // y in [20, 548]; every circle center must fall inside it.
        let obs = sample_observations(60, 25);
        let svg = scatter_figure(&obs, &[], &FigureOptions::default()).unwrap();
        for line in svg.lines().filter(|l| l.starts_with("<circle")) {
            let cx: f64 = attr(line, "cx").parse().unwrap();
            let cy: f64 = attr(line, "cy").parse().unwrap();
            assert!((72.0..=780.0).contains(&cx), "{line}");
            assert!((20.0..=548.0).contains(&cy), "{line}");
        }
    }

    #[test]
    fn tick_labels_match_the_step_precision() {
        let (ticks, step) = nice_ticks(-1.93, 2.41, 6);
        assert!((step - 1.0).abs() < 1e-12);
        assert_eq!(
            ticks.iter().map(|&t| fmt_tick(t, step)).collect::<Vec<_>>(),
            vec!["-1", "0", "1", "2"]
        );
        // 0.123/6 = 0.0205 rounds up to 0.05 in the 1-2-5 scheme.
        let (ticks, step) = nice_ticks(0.0, 0.123, 6);
        assert!((step - 0.05).abs() < 1e-12);
        assert_eq!(fmt_tick(ticks[1], step), "0.05");
        // Ticks cover the range without escaping it.
        assert!(*ticks.first().unwrap() >= 0.0 && *ticks.last().unwrap() <= 0.123);
    }

    #[test]
    fn text_is_escaped() {
        let obs = sample_observations(3, 26);
        let options = FigureOptions {
            title: Some("a < b & c > d".to_string()),
            ..FigureOptions::default()
        };
        let svg = scatter_figure(&obs, &[], &options).unwrap();
        assert!(svg.contains("a &lt; b &amp; c &gt; d"));
    }

    fn attr<'a>(line: &'a str, name: &str) -> &'a str {
        let key = format!("{name}=\"");
        let start = line.find(&key).unwrap() + key.len();
        let end = line[start..].find('"').unwrap();
        &line[start..start + end]
    }
}
