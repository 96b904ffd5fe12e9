//! Self-contained SVG line charts from CSV columns.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::CliError;
use crate::table::Columns;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn bounds(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if lo > hi {
        return None;
    }
    if lo == hi {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.05 };
        return Some((lo - pad, hi + pad));
    }
    Some((lo, hi))
}

/// Renders the chart for `x` against each of `ys`.
pub fn render_svg(data: &Columns, x: &str, ys: &[String]) -> Result<String, CliError> {
    if ys.is_empty() {
        return Err(CliError::Validation("at least one y column is required".into()));
    }
    let xi = data.index(x)?;
    let yi: Vec<usize> = ys.iter().map(|y| data.index(y)).collect::<Result<_, _>>()?;
    if data.rows.is_empty() {
        return Err(CliError::Validation("no data rows".into()));
    }
    let (x0, x1) = bounds(data.column(xi)).ok_or_else(|| CliError::Validation(format!("column `{x}` has no finite values")))?;
    let (y0, y1) = bounds(yi.iter().flat_map(|&i| data.column(i)))
        .ok_or_else(|| CliError::Validation("y columns have no finite values".into()))?;

    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |v: f64| LEFT + (v - x0) / (x1 - x0) * pw;
    let sy = |v: f64| TOP + (1.0 - (v - y0) / (y1 - y0)) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let (px, py) = (sx(xv), sy(yv));
        let _ = writeln!(
            s,
            r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{xv:.4e}</text>"#,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 20.0
        );
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{yv:.3e}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            py + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 15.0,
        escape(x)
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(&ys.join(", "))
    );

    for (k, &col) in yi.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        // non-finite values split the line
        let mut segments: Vec<Vec<String>> = vec![Vec::new()];
        for row in &data.rows {
            let (xv, yv) = (row[xi], row[col]);
            if xv.is_finite() && yv.is_finite() {
                segments.last_mut().expect("non-empty").push(format!("{:.2},{:.2}", sx(xv), sy(yv)));
            } else if !segments.last().expect("non-empty").is_empty() {
                segments.push(Vec::new());
            }
        }
        for seg in segments.iter().filter(|p| !p.is_empty()) {
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                seg.join(" ")
            );
        }
    }

    if ys.len() > 1 {
        let _ = writeln!(s, r#"<g class="legend">"#);
        for (k, name) in ys.iter().enumerate() {
            let y = TOP + 15.0 + 18.0 * k as f64;
            let x = LEFT + pw - 160.0;
            let _ = writeln!(
                s,
                r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{}" stroke-width="3"/><text x="{:.2}" y="{:.2}">{}</text>"#,
                x + 25.0,
                PALETTE[k % PALETTE.len()],
                x + 32.0,
                y + 4.0,
                escape(name)
            );
        }
        let _ = writeln!(s, "</g>");
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Reads `csv_file` and writes the chart next to it (or to `output`).
pub fn emit_svg(csv_file: &Path, x: &str, ys: &[String], output: Option<&Path>) -> Result<PathBuf, CliError> {
    let text = std::fs::read_to_string(csv_file).map_err(|e| CliError::io(csv_file.display(), e))?;
    let data = Columns::parse(&text)?;
    let svg = render_svg(&data, x, ys)?;
    let out = output.map(Path::to_path_buf).unwrap_or_else(|| csv_file.with_extension("svg"));
    std::fs::write(&out, svg).map_err(|e| CliError::io(out.display(), e))?;
    Ok(out)
}
