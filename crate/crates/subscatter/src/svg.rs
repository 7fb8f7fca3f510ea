//! Static line/scatter plots as SVG. Output depends only on the table and
//! the plot description, so equal inputs give equal bytes.

use std::fmt::Write as _;

use crate::error::{CliError, Result};
use crate::table::Table;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Line,
    Dashed,
    Points,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub column: String,
    pub style: Style,
}

impl Series {
    pub fn new(column: &str, style: Style) -> Self {
        Series { column: column.into(), style }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub title: String,
    pub x: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub log_y: bool,
    /// Labelled horizontal reference lines, such as barrier edges.
    pub hlines: Vec<(f64, String)>,
}

impl PlotSpec {
    pub fn new(title: &str, x: &str, y_label: &str, series: Vec<Series>) -> Self {
        PlotSpec { title: title.into(), x: x.into(), y_label: y_label.into(), series, log_y: false, hlines: Vec::new() }
    }
}

/// Renders the plot. Every named column must exist; rows whose cells have
/// no finite value (or a non-positive one on a log axis) are skipped.
pub fn emit_svg(table: &Table, spec: &PlotSpec) -> Result<String> {
    let col = |name: &str| {
        table.column_index(name).ok_or_else(|| CliError::Config(format!("plot column `{name}` is not in the table")))
    };
    let xi = col(&spec.x)?;
    let mut series = Vec::with_capacity(spec.series.len());
    for s in &spec.series {
        let yi = col(&s.column)?;
        let pts: Vec<(f64, f64)> = table
            .rows
            .iter()
            .filter_map(|r| Some((r[xi].number()?, r[yi].number()?)))
            .filter(|p| !spec.log_y || p.1 > 0.0)
            .map(|(x, y)| (x, if spec.log_y { y.log10() } else { y }))
            .collect();
        series.push((s, pts));
    }
    let hlines: Vec<(f64, &str)> = spec
        .hlines
        .iter()
        .filter(|h| h.0.is_finite() && (!spec.log_y || h.0 > 0.0))
        .map(|(y, l)| (if spec.log_y { y.log10() } else { *y }, l.as_str()))
        .collect();

    let xs = series.iter().flat_map(|s| s.1.iter().map(|p| p.0));
    let ys = series.iter().flat_map(|s| s.1.iter().map(|p| p.1)).chain(hlines.iter().map(|h| h.0));
    let (x0, x1) = padded(bounds(xs), false);
    let (y0, y1) = padded(bounds(ys), true);
    let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * (WIDTH - LEFT - RIGHT);
    let py = |y: f64| HEIGHT - BOTTOM - (y - y0) / (y1 - y0) * (HEIGHT - TOP - BOTTOM);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(&spec.title));

    // Axes and ticks.
    let (bx, by) = (HEIGHT - BOTTOM, LEFT);
    let _ = writeln!(
        s,
        r#"<path d="M{by:.1},{TOP:.1} V{bx:.1} H{:.1}" fill="none" stroke="black"/>"#,
        WIDTH - RIGHT
    );
    for t in ticks(x0, x1) {
        let x = px(t);
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{bx:.1}" x2="{x:.2}" y2="{:.1}" stroke="black"/>"#, bx + 5.0);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.1}" text-anchor="middle">{}</text>"#, bx + 18.0, tick_label(t, false));
    }
    for t in ticks(y0, y1) {
        let y = py(t);
        let _ = writeln!(s, r#"<line x1="{:.1}" y1="{y:.2}" x2="{by:.1}" y2="{y:.2}" stroke="black"/>"#, by - 5.0);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.2}" text-anchor="end">{}</text>"#,
            by - 8.0,
            y + 4.0,
            tick_label(t, spec.log_y)
        );
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, (LEFT + WIDTH - RIGHT) / 2.0, HEIGHT - 12.0, escape(&spec.x));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{0:.1}" text-anchor="middle" transform="rotate(-90 16 {0:.1})">{1}</text>"#,
        (TOP + HEIGHT - BOTTOM) / 2.0,
        escape(&spec.y_label)
    );

    for (y, label) in &hlines {
        let y = py(*y);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT:.1}" y1="{y:.2}" x2="{:.1}" y2="{y:.2}" stroke="#888888" stroke-dasharray="2,3"/>"##,
            WIDTH - RIGHT
        );
        let _ = writeln!(s, r##"<text x="{:.1}" y="{:.2}" text-anchor="end" fill="#555555">{}</text>"##, WIDTH - RIGHT - 4.0, y - 4.0, escape(label));
    }

    for (i, (spec_s, pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        match spec_s.style {
            Style::Points => {
                for &(x, y) in pts {
                    let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="none" stroke="{color}"/>"#, px(x), py(y));
                }
            }
            Style::Line | Style::Dashed if !pts.is_empty() => {
                let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
                let dash = if spec_s.style == Style::Dashed { r#" stroke-dasharray="6,4""# } else { "" };
                let _ = writeln!(
                    s,
                    r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#,
                    coords.join(" ")
                );
            }
            _ => {}
        }
        let ly = TOP + 16.0 * (i as f64 + 1.0);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{ly:.1}" fill="{color}">{}</text>"#, LEFT + 12.0, escape(&spec_s.column));
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn bounds(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    values.fold(None, |acc, v| match acc {
        None => Some((v, v)),
        Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
    })
}

/// Unit range for an empty axis; a margin on the y-axis; a symmetric
/// widening of degenerate ranges.
fn padded(b: Option<(f64, f64)>, margin: bool) -> (f64, f64) {
    let Some((lo, hi)) = b else { return (0.0, 1.0) };
    if hi <= lo {
        let w = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
        return (lo - w, hi + w);
    }
    let m = if margin { 0.05 * (hi - lo) } else { 0.0 };
    (lo - m, hi + m)
}

/// Round tick values (1, 2 or 5 times a power of ten) inside [lo, hi].
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|f| f * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn tick_label(v: f64, log: bool) -> String {
    if log {
        return format!("1e{}", v.round() as i64);
    }
    let v = if v.abs() < 1e-12 { 0.0 } else { v };
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e5).contains(&a) {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').into()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::Cell;

    fn two_columns() -> Table {
        let mut t = Table::new(&["x", "y"]);
        for i in 0..5 {
            t.push(vec![Cell::Num(i as f64), Cell::Num((i * i) as f64)]);
        }
        t
    }

    #[test]
    fn two_columns_give_one_polyline() {
        let spec = PlotSpec::new("demo", "x", "y", vec![Series::new("y", Style::Line)]);
        let svg = emit_svg(&two_columns(), &spec).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert_eq!(svg, emit_svg(&two_columns(), &spec).unwrap());
    }

    #[test]
    fn empty_table_draws_axes_only() {
        let spec = PlotSpec::new("empty", "x", "y", vec![Series::new("y", Style::Points)]);
        let svg = emit_svg(&Table::new(&["x", "y"]), &spec).unwrap();
        assert!(svg.contains("<path d=\"M"));
        assert!(!svg.contains("<polyline") && !svg.contains("<circle"));
    }

    #[test]
    fn missing_column_is_a_config_error() {
        let spec = PlotSpec::new("demo", "x", "z", vec![Series::new("z", Style::Line)]);
        let err = emit_svg(&two_columns(), &spec).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn log_axis_skips_non_positive_values() {
        let mut spec = PlotSpec::new("demo", "x", "y", vec![Series::new("y", Style::Points)]);
        spec.log_y = true;
        let svg = emit_svg(&two_columns(), &spec).unwrap();
        assert_eq!(svg.matches("<circle").count(), 4);
    }

    #[test]
    fn ticks_are_round() {
        assert_eq!(ticks(0.0, 1.0), vec![0.0, 0.2, 0.4, 0.6000000000000001, 0.8, 1.0]);
        assert_eq!(tick_label(0.25, false), "0.25");
        assert_eq!(tick_label(3.0, true), "1e3");
        assert_eq!(tick_label(2.0e-5, false), "2.0e-5");
    }
}
