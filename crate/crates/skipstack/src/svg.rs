//! Deterministic line plots. The document is a single `<svg>` root holding only
//! `path`, `line` and `text` elements, with a fixed canvas and palette.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::formats;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 48.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PlotKind {
    Spectrum,
    Coverage,
    AccuracyGrid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Figure {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Labeled horizontal reference lines.
    pub rules: Vec<(String, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        let pad = if lo == 0.0 { 1.0 } else { 0.05 * lo.abs() };
        return (lo - pad, hi + pad);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

impl Figure {
    pub fn render(&self) -> String {
        let (x0, x1) = range(self.series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
        let (y0, y1) = range(
            self.series.iter().flat_map(|s| s.points.iter().map(|p| p.1)).chain(self.rules.iter().map(|r| r.1)),
        );
        let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(s, r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">{}</text>"#, LEFT + pw / 2.0, escape(&self.title));
        let (bx, by) = (LEFT, TOP + ph);
        let _ = writeln!(s, r#"<line x1="{bx:.2}" y1="{by:.2}" x2="{:.2}" y2="{by:.2}" stroke="black"/>"#, LEFT + pw);
        let _ = writeln!(s, r#"<line x1="{bx:.2}" y1="{TOP:.2}" x2="{bx:.2}" y2="{by:.2}" stroke="black"/>"#);
        for i in 0..=4 {
            let f = i as f64 / 4.0;
            let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
            let (tx, ty) = (sx(xv), sy(yv));
            let _ = writeln!(s, r#"<line x1="{tx:.2}" y1="{by:.2}" x2="{tx:.2}" y2="{:.2}" stroke="black"/>"#, by + 4.0);
            let _ = writeln!(s, r#"<text x="{tx:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, by + 16.0, tick(xv));
            let _ = writeln!(s, r#"<line x1="{:.2}" y1="{ty:.2}" x2="{bx:.2}" y2="{ty:.2}" stroke="black"/>"#, bx - 4.0);
            let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, bx - 6.0, ty + 4.0, tick(yv));
        }
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, HEIGHT - 10.0, escape(&self.x_label));
        let _ = writeln!(
            s,
            r#"<text x="14" y="{:.2}" text-anchor="middle" transform="rotate(-90 14 {:.2})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );

        for (i, (label, y)) in self.rules.iter().enumerate() {
            let ty = sy(*y);
            let _ = writeln!(s, r##"<line x1="{LEFT:.2}" y1="{ty:.2}" x2="{:.2}" y2="{ty:.2}" stroke="#777777" stroke-dasharray="4 3"/>"##, LEFT + pw);
            let _ = writeln!(s, r##"<text x="{:.2}" y="{:.2}" text-anchor="end" fill="#777777">{}</text>"##, LEFT + pw - 2.0 - 60.0 * i as f64, ty - 3.0, escape(label));
        }

        for (i, series) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let mut d = String::new();
            if let [(x, y)] = series.points.as_slice() {
                let (px, py) = (sx(*x), sy(*y));
                let _ = write!(d, "M{:.2} {:.2}L{:.2} {:.2}M{:.2} {:.2}L{:.2} {:.2}", px - 4.0, py, px + 4.0, py, px, py - 4.0, px, py + 4.0);
            } else {
                for (j, (x, y)) in series.points.iter().enumerate() {
                    let _ = write!(d, "{}{:.2} {:.2}", if j == 0 { 'M' } else { 'L' }, sx(*x), sy(*y));
                }
            }
            let _ = writeln!(s, r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="1.5"/>"#);
            let ly = TOP + 10.0 + 16.0 * i as f64;
            let lx = WIDTH - RIGHT + 14.0;
            let _ = writeln!(s, r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#, lx + 18.0);
            let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, lx + 24.0, ly + 4.0, escape(&series.label));
        }
        s.push_str("</svg>\n");
        s
    }
}

fn tick(v: f64) -> String {
    if v.abs() >= 1000.0 || (v != 0.0 && v.abs() < 0.01) {
        format!("{v:.2e}")
    } else {
        format!("{v:.2}")
    }
}

fn column(header: &[String], name: &str, kind: PlotKind) -> Result<usize> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| CliError::format(format!("{kind:?} CSV"), format!("missing column {name:?}")))
}

fn number(s: &str, what: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|_| CliError::format("plot input", format!("{what}: {s:?} is not a number")))
}

/// Groups `(x, y)` pairs by a label column, keeping first-appearance order.
fn grouped(rows: &[Vec<String>], label: usize, x: usize, y: usize) -> Result<Vec<Series>> {
    let mut out: Vec<Series> = Vec::new();
    for r in rows {
        let (xv, yv) = (number(&r[x], "x")?, number(&r[y], "y")?);
        if !yv.is_finite() {
            continue;
        }
        match out.iter_mut().find(|s| s.label == r[label]) {
            Some(s) => s.points.push((xv, yv)),
            None => out.push(Series { label: r[label].clone(), points: vec![(xv, yv)] }),
        }
    }
    Ok(out)
}

/// Builds the figure for a CSV produced by the `spectrum`, `sim-condition` or
/// `run-recognition` commands.
pub fn figure_from_csv(bytes: &[u8], kind: PlotKind) -> Result<Figure> {
    let (header, rows) = formats::read_csv(bytes)?;
    if rows.is_empty() {
        return Err(CliError::format("plot input", "CSV has no data rows"));
    }
    match kind {
        PlotKind::Spectrum => {
            let (l, i, s) = (column(&header, "level", kind)?, column(&header, "index", kind)?, column(&header, "sigma_normalized", kind)?);
            let mut series = grouped(&rows, l, i, s)?;
            series.iter_mut().for_each(|s| s.label = format!("L={}", s.label));
            Ok(Figure { title: "Normalized singular values".into(), x_label: "index".into(), y_label: "sigma / sigma_1".into(), series, rules: Vec::new() })
        }
        PlotKind::Coverage => {
            let (t, b) = (column(&header, "trial", kind)?, column(&header, "beta", kind)?);
            let (lo, hi) = (column(&header, "lower", kind)?, column(&header, "upper", kind)?);
            let mut series = Vec::new();
            let points = rows
                .iter()
                .map(|r| Ok((number(&r[t], "trial")?, number(&r[b], "beta")?)))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .filter(|p| p.1.is_finite())
                .collect();
            series.push(Series { label: "beta".into(), points });
            let mut rules = Vec::new();
            for (name, idx) in [("lower", lo), ("upper", hi)] {
                let v = number(&rows[0][idx], name)?;
                if v.is_finite() {
                    rules.push((name.to_string(), v));
                }
            }
            Ok(Figure { title: "Condition number per trial".into(), x_label: "trial".into(), y_label: "beta".into(), series, rules })
        }
        PlotKind::AccuracyGrid => {
            let (k, l, m) = (column(&header, "kind", kind)?, column(&header, "level", kind)?, column(&header, "macc", kind)?);
            let label = column(&header, "label", kind)?;
            let mut series = grouped(&rows.iter().filter(|r| r[k] != "masked").cloned().collect::<Vec<_>>(), k, l, m)?;
            for r in rows.iter().filter(|r| r[k] == "masked") {
                series.push(Series { label: r[label].clone(), points: vec![(number(&r[l], "level")?, number(&r[m], "macc")?)] });
            }
            Ok(Figure { title: "Accuracy by level".into(), x_label: "level".into(), y_label: "MAcc (%)".into(), series, rules: Vec::new() })
        }
    }
}
