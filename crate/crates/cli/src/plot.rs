//! Deterministic SVG log-log plots: scatter points, an optional fitted
//! power-law line, and an optional reference-slope guide line.

use std::fmt::Write;
use std::path::Path;

use oscnet_core::analysis::DecayFit;

use crate::artifacts::write_string;
use crate::CliError;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;

#[derive(Debug, Clone)]
pub struct PlotSpec {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<(f64, f64)>,
    /// Power law `y = exp(intercept) * x^slope` drawn across the x range.
    pub fit: Option<(f64, f64)>,
    /// Guide slope anchored at the first point.
    pub reference_slope: Option<f64>,
}

impl PlotSpec {
    pub fn from_fit(title: &str, x_label: &str, y_label: &str, fit: &DecayFit) -> Self {
        PlotSpec {
            title: title.to_string(),
            x_label: x_label.to_string(),
            y_label: y_label.to_string(),
            points: fit.x.iter().copied().zip(fit.y.iter().copied()).collect(),
            fit: Some((fit.slope, fit.intercept)),
            reference_slope: None,
        }
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.3}")
}

/// Renders the spec. All point coordinates must be strictly positive.
pub fn render_loglog_svg(spec: &PlotSpec) -> Result<String, CliError> {
    if spec.points.is_empty() {
        return Err(CliError::Artifact("plot has no points".into()));
    }
    for &(x, y) in &spec.points {
        if x <= 0.0 || y <= 0.0 || !x.is_finite() || !y.is_finite() {
            return Err(CliError::Artifact(format!(
                "log-log plot requires positive finite coordinates, got ({x}, {y})"
            )));
        }
    }
    let log: Vec<(f64, f64)> = spec
        .points
        .iter()
        .map(|&(x, y)| (x.ln(), y.ln()))
        .collect();
    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &log {
        x_min = x_min.min(x);
        x_max = x_max.max(x);
        y_min = y_min.min(y);
        y_max = y_max.max(y);
    }
    // Guide and fit lines live in the same frame; widen to keep them visible.
    if let Some((slope, intercept)) = spec.fit {
        for x in [x_min, x_max] {
            let y = intercept + slope * x;
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
    }
    if let Some(slope) = spec.reference_slope {
        let (x0, y0) = log[0];
        for x in [x_min, x_max] {
            let y = y0 + slope * (x - x0);
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
    }
    if x_max - x_min < 1e-12 {
        x_min -= 0.5;
        x_max += 0.5;
    }
    if y_max - y_min < 1e-12 {
        y_min -= 0.5;
        y_max += 0.5;
    }
    let pad_x = 0.05 * (x_max - x_min);
    let pad_y = 0.05 * (y_max - y_min);
    x_min -= pad_x;
    x_max += pad_x;
    y_min -= pad_y;
    y_max += pad_y;
    let sx = |x: f64| MARGIN + (x - x_min) / (x_max - x_min) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y_min) / (y_max - y_min) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    );
    let _ = writeln!(svg, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"30\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">{}</text>",
        WIDTH / 2.0,
        spec.title
    );
    // Axes.
    let _ = writeln!(
        svg,
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>",
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
    let _ = writeln!(
        svg,
        "<line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>",
        m = MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN
    );
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">ln {}</text>",
        WIDTH / 2.0,
        HEIGHT - 15.0,
        spec.x_label
    );
    let _ = writeln!(
        svg,
        "<text x=\"18\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 18 {})\">ln {}</text>",
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        spec.y_label
    );
    // Tick labels at the data extremes (natural-log frame).
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">{}</text>",
        sx(x_min + pad_x),
        HEIGHT - MARGIN + 18.0,
        fmt(x_min + pad_x)
    );
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">{}</text>",
        sx(x_max - pad_x),
        HEIGHT - MARGIN + 18.0,
        fmt(x_max - pad_x)
    );
    if let Some((slope, intercept)) = spec.fit {
        let _ = writeln!(
            svg,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#1f77b4\" stroke-width=\"1.5\"/>",
            fmt(sx(x_min + pad_x)),
            fmt(sy(intercept + slope * (x_min + pad_x))),
            fmt(sx(x_max - pad_x)),
            fmt(sy(intercept + slope * (x_max - pad_x)))
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"50\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#1f77b4\">slope {}</text>",
            WIDTH - MARGIN,
            fmt(slope)
        );
    }
    if let Some(slope) = spec.reference_slope {
        let (x0, y0) = log[0];
        let _ = writeln!(
            svg,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#888\" stroke-dasharray=\"5,4\"/>",
            fmt(sx(x_min + pad_x)),
            fmt(sy(y0 + slope * (x_min + pad_x - x0))),
            fmt(sx(x_max - pad_x)),
            fmt(sy(y0 + slope * (x_max - pad_x - x0)))
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"68\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#888\">reference slope {}</text>",
            WIDTH - MARGIN,
            fmt(slope)
        );
    }
    for &(x, y) in &log {
        let _ = writeln!(
            svg,
            "<circle cx=\"{}\" cy=\"{}\" r=\"4\" fill=\"#d62728\"/>",
            fmt(sx(x)),
            fmt(sy(y))
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn write_loglog_svg(path: &Path, spec: &PlotSpec) -> Result<(), CliError> {
    let svg = render_loglog_svg(spec)?;
    write_string(path, &svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> PlotSpec {
        PlotSpec {
            title: "decay".into(),
            x_label: "width".into(),
            y_label: "error".into(),
            points: vec![(2.0, 0.5), (4.0, 0.25), (8.0, 0.125)],
            fit: Some((-1.0, 0.0)),
            reference_slope: Some(-0.5),
        }
    }

    #[test]
    fn render_is_deterministic_and_well_formed() {
        let a = render_loglog_svg(&spec()).unwrap();
        let b = render_loglog_svg(&spec()).unwrap();
        assert_eq!(a, b);
        assert!(a.starts_with("<svg"));
        assert!(a.trim_end().ends_with("</svg>"));
        assert_eq!(a.matches("<circle").count(), 3);
    }

    #[test]
    fn nonpositive_points_are_rejected() {
        let mut s = spec();
        s.points.push((1.0, 0.0));
        assert!(render_loglog_svg(&s).is_err());
        let mut s = spec();
        s.points.push((-1.0, 1.0));
        assert!(render_loglog_svg(&s).is_err());
        let mut s = spec();
        s.points.clear();
        assert!(render_loglog_svg(&s).is_err());
    }

    #[test]
    fn single_point_still_renders() {
        let s = PlotSpec {
            title: "one".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            points: vec![(3.0, 7.0)],
            fit: None,
            reference_slope: None,
        };
        let svg = render_loglog_svg(&s).unwrap();
        assert_eq!(svg.matches("<circle").count(), 1);
    }
}
