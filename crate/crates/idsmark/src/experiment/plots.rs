//! Self-contained SVG line charts of sweep results: one file per metric,
//! one polyline per decoder, metric mean against target entropy.
//!
//! Each polyline carries the raw table values in a `data-points` attribute
//! (`x,y` pairs, space-separated) so tests and downstream tooling can read
//! the plotted numbers back without touching pixel coordinates.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::decoder::DecoderKind;
use crate::experiment::OverallRow;
use crate::Result;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 44.0;
const MARGIN_BOTTOM: f64 = 56.0;

fn color(kind: DecoderKind) -> &'static str {
    match kind {
        DecoderKind::Dm1 => "#1f77b4",
        DecoderKind::Dm2 => "#2ca02c",
        DecoderKind::Fsmc => "#d62728",
    }
}

type ValueFn = fn(&OverallRow) -> Option<f64>;

/// Writes `ber.svg`, `niis.svg`, and `sao.svg` into `dir`; returns the paths.
pub fn emit_plots(rows: &[OverallRow], dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let charts: [(&str, &str, ValueFn); 3] = [
        ("ber", "Mean bit error rate vs channel entropy", |r| {
            r.mean_ber
        }),
        (
            "niis",
            "Mean misidentified-state fraction vs channel entropy",
            |r| r.mean_niis,
        ),
        (
            "sao",
            "Mean summed absolute offset vs channel entropy",
            |r| r.mean_sao,
        ),
    ];
    let mut paths = Vec::with_capacity(charts.len());
    for (name, title, value) in charts {
        let path = dir.join(format!("{name}.svg"));
        std::fs::write(&path, render_chart(rows, title, value))?;
        paths.push(path);
    }
    Ok(paths)
}

type Series = (DecoderKind, Vec<(f64, f64)>);

fn collect_series(rows: &[OverallRow], value: ValueFn) -> Vec<Series> {
    DecoderKind::ALL
        .into_iter()
        .filter_map(|kind| {
            let mut points: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.decoder == kind)
                .filter_map(|r| value(r).map(|v| (r.entropy_target, v)))
                .collect();
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            (!points.is_empty()).then_some((kind, points))
        })
        .collect()
}

/// Renders one chart. With no plottable points the axes frame is still
/// emitted, just without polylines.
pub fn render_chart(rows: &[OverallRow], title: &str, value: ValueFn) -> String {
    let series = collect_series(rows, value);

    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for (_, points) in &series {
        for &(x, y) in points {
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
    }
    if !x_min.is_finite() {
        (x_min, x_max) = (0.0, 1.0);
        (y_min, y_max) = (0.0, 1.0);
    }
    if x_max - x_min < 1e-12 {
        x_min -= 0.01;
        x_max += 0.01;
    }
    if y_max - y_min < 1e-12 {
        let pad = if y_max == 0.0 { 0.5 } else { y_max.abs() * 0.1 };
        y_min -= pad;
        y_max += pad;
    }

    let px =
        |x: f64| MARGIN_LEFT + (x - x_min) / (x_max - x_min) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT);
    let py = |y: f64| {
        HEIGHT
            - MARGIN_BOTTOM
            - (y - y_min) / (y_max - y_min) * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"13\">"
    );
    let _ = writeln!(
        svg,
        "  <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"#ffffff\"/>"
    );
    let _ = writeln!(
        svg,
        "  <text x=\"{:.2}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{}</text>",
        WIDTH / 2.0,
        escape(title)
    );

    // Axes with min/max tick labels.
    let (left, right) = (px(x_min), px(x_max));
    let (bottom, top) = (py(y_min), py(y_max));
    let _ = writeln!(
        svg,
        "  <line x1=\"{left:.2}\" y1=\"{bottom:.2}\" x2=\"{right:.2}\" y2=\"{bottom:.2}\" stroke=\"#333333\"/>"
    );
    let _ = writeln!(
        svg,
        "  <line x1=\"{left:.2}\" y1=\"{bottom:.2}\" x2=\"{left:.2}\" y2=\"{top:.2}\" stroke=\"#333333\"/>"
    );
    for frac in [0.0, 0.5, 1.0] {
        let xv = x_min + frac * (x_max - x_min);
        let yv = y_min + frac * (y_max - y_min);
        let _ = writeln!(
            svg,
            "  <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
            px(xv),
            bottom + 20.0,
            format_tick(xv)
        );
        let _ = writeln!(
            svg,
            "  <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>",
            left - 8.0,
            py(yv) + 4.0,
            format_tick(yv)
        );
    }
    let _ = writeln!(
        svg,
        "  <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">channel entropy (bits)</text>",
        (left + right) / 2.0,
        HEIGHT - 12.0
    );

    for (idx, (kind, points)) in series.iter().enumerate() {
        let pixels: Vec<String> = points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let data: Vec<String> = points.iter().map(|&(x, y)| format!("{x},{y}")).collect();
        let _ = writeln!(
            svg,
            "  <polyline fill=\"none\" stroke=\"{}\" stroke-width=\"2\" points=\"{}\" \
             data-series=\"{}\" data-points=\"{}\"/>",
            color(*kind),
            pixels.join(" "),
            kind,
            data.join(" ")
        );
        for &(x, y) in points {
            let _ = writeln!(
                svg,
                "  <circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{}\"/>",
                px(x),
                py(y),
                color(*kind)
            );
        }
        let legend_x = left + 12.0 + idx as f64 * 90.0;
        let _ = writeln!(
            svg,
            "  <rect x=\"{:.2}\" y=\"{:.2}\" width=\"12\" height=\"12\" fill=\"{}\"/>",
            legend_x,
            MARGIN_TOP - 6.0,
            color(*kind)
        );
        let _ = writeln!(
            svg,
            "  <text x=\"{:.2}\" y=\"{:.2}\">{}</text>",
            legend_x + 16.0,
            MARGIN_TOP + 5.0,
            kind
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn format_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let magnitude = v.abs();
    if (0.001..10_000.0).contains(&magnitude) {
        format!("{v:.3}")
    } else {
        format!("{v:e}")
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
