//! Static line charts of timeline series.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use offbias::io::{read_timeline, TimelineRow};

use crate::CliError;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

/// One named curve.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub name: String,
    pub rows: Vec<TimelineRow>,
}

impl Series {
    /// Reads a timeline CSV; the series is named after the file stem.
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let rows = read_timeline(path)?;
        let name = path.file_stem().map_or_else(
            || path.display().to_string(),
            |s| s.to_string_lossy().into_owned(),
        );
        Ok(Series { name, rows })
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Range padded so a flat series still gets a visible band.
fn span(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        (lo, hi)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.5 };
        (lo - pad, hi + pad)
    }
}

/// Renders the SVG document. Every series must have at least one row.
pub fn render_svg(series: &[Series]) -> Result<String, CliError> {
    if series.is_empty() {
        return Err(CliError::Data("no series to render".into()));
    }
    if let Some(empty) = series.iter().find(|s| s.rows.is_empty()) {
        return Err(CliError::Data(format!(
            "series `{}` has no rows",
            empty.name
        )));
    }
    let rows = || series.iter().flat_map(|s| s.rows.iter());
    let (t0, t1) = span(
        rows().map(|r| r.time as f64).fold(f64::INFINITY, f64::min),
        rows()
            .map(|r| r.time as f64)
            .fold(f64::NEG_INFINITY, f64::max),
    );
    let (y0, y1) = span(
        rows().map(|r| r.score).fold(f64::INFINITY, f64::min),
        rows().map(|r| r.score).fold(f64::NEG_INFINITY, f64::max),
    );
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let x = |t: f64| LEFT + (t - t0) / (t1 - t0) * plot_w;
    let y = |s: f64| TOP + (y1 - s) / (y1 - y0) * plot_h;
    let x_axis = HEIGHT - BOTTOM;
    let right = LEFT + plot_w;

    let mut out = String::new();
    let w = &mut out;
    // write! on a String cannot fail
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(w, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        w,
        r#"<g class="axes" stroke="black"><line x1="{LEFT}" y1="{x_axis}" x2="{right}" y2="{x_axis}"/><line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{x_axis}"/></g>"#
    );
    let _ = writeln!(
        w,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">time</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        w,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">score</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );
    for (t, anchor) in [(t0, "start"), (t1, "end")] {
        let _ = writeln!(
            w,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="{anchor}">{}</text>"#,
            x(t),
            x_axis + 16.0,
            t
        );
    }
    for s in [y0, y1] {
        let _ = writeln!(
            w,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{:.4}</text>"#,
            LEFT - 6.0,
            y(s) + 4.0,
            s
        );
    }
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let points: Vec<String> = s
            .rows
            .iter()
            .map(|r| format!("{:.2},{:.2}", x(r.time as f64), y(r.score)))
            .collect();
        let _ = writeln!(
            w,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            points.join(" ")
        );
        let ly = TOP + 14.0 + 18.0 * k as f64;
        let _ = writeln!(
            w,
            r#"<g class="legend"><line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text></g>"#,
            right + 12.0,
            right + 32.0,
            right + 38.0,
            ly + 4.0,
            escape(&s.name)
        );
    }
    let _ = writeln!(w, "</svg>");
    Ok(out)
}

/// Writes the chart to `out`; nothing is written if any series is empty.
pub fn render_series(series: &[Series], out: &Path) -> Result<(), CliError> {
    let svg = render_svg(series)?;
    std::fs::write(out, svg).map_err(|e| CliError::io(out, e))
}

/// Reads timeline CSVs and charts them in the given order.
pub fn render_series_files(inputs: &[PathBuf], out: &Path) -> Result<(), CliError> {
    let series = inputs
        .iter()
        .map(|p| Series::read(p))
        .collect::<Result<Vec<_>, _>>()?;
    render_series(&series, out)
}
