//! Minimal SVG line plots of an episode.
//!
//! Every plot area is a `<g class="plot">` carrying its axis ranges as
//! `data-*` attributes so that pixel coordinates can be mapped back to data.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::Vector2;

use crate::error::Result;
use crate::harness::{Episode, Snapshot};
use crate::records::io_error;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 50.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

impl Series {
    pub fn new(name: &str, points: Vec<(f64, f64)>) -> Self {
        Self {
            name: name.to_string(),
            points,
            dashed: false,
        }
    }

    pub fn dashed(mut self) -> Self {
        self.dashed = true;
        self
    }
}

/// Axis mapping of one plot area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub log_y: bool,
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
}

impl Frame {
    fn ty(&self, y: f64) -> f64 {
        if self.log_y {
            y.log10()
        } else {
            y
        }
    }

    /// Returns `None` for points the axis cannot show (non-finite, or `<= 0` on a log axis).
    pub fn to_pixel(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        if !x.is_finite() || !y.is_finite() || (self.log_y && y <= 0.0) {
            return None;
        }
        let (lo, hi) = (self.ty(self.y_min), self.ty(self.y_max));
        let px = self.left + (x - self.x_min) / (self.x_max - self.x_min) * self.width;
        let py = self.top + (hi - self.ty(y)) / (hi - lo) * self.height;
        Some((px, py))
    }

    pub fn from_pixel(&self, px: f64, py: f64) -> (f64, f64) {
        let (lo, hi) = (self.ty(self.y_min), self.ty(self.y_max));
        let x = self.x_min + (px - self.left) / self.width * (self.x_max - self.x_min);
        let v = hi - (py - self.top) / self.height * (hi - lo);
        (x, if self.log_y { 10f64.powf(v) } else { v })
    }
}

fn range(values: impl Iterator<Item = f64>, log: bool) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| v.is_finite() && (!log || *v > 0.0)) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return if log { (0.1, 1.0) } else { (0.0, 1.0) };
    }
    if log {
        let (a, b) = (lo.log10().floor(), hi.log10().ceil());
        let b = if b <= a { a + 1.0 } else { b };
        (10f64.powf(a), 10f64.powf(b))
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

fn ticks(lo: f64, hi: f64, log: bool) -> Vec<f64> {
    if log {
        let (a, b) = (lo.log10().round() as i32, hi.log10().round() as i32);
        return (a..=b).map(|e| 10f64.powi(e)).collect();
    }
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let mut out = Vec::new();
    let mut v = (lo / step).ceil() * step;
    while v <= hi + 1e-9 * step {
        out.push(if v.abs() < 1e-12 * step { 0.0 } else { v });
        v += step;
    }
    out
}

/// One line chart.
#[derive(Debug, Clone)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    /// Same scale on both axes (trajectory plots).
    pub equal_axes: bool,
    pub series: Vec<Series>,
}

impl Chart {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Self {
            title: title.to_string(),
            x_label: x_label.to_string(),
            y_label: y_label.to_string(),
            log_y: false,
            equal_axes: false,
            series: Vec::new(),
        }
    }

    pub fn frame(&self, left: f64, top: f64, width: f64, height: f64) -> Frame {
        let pts = || self.series.iter().flat_map(|s| s.points.iter());
        let (mut x_min, mut x_max) = range(pts().map(|p| p.0), false);
        let (mut y_min, mut y_max) = range(pts().map(|p| p.1), self.log_y);
        if self.equal_axes && !self.log_y {
            let span = (x_max - x_min).max(y_max - y_min);
            let (cx, cy) = (0.5 * (x_min + x_max), 0.5 * (y_min + y_max));
            x_min = cx - 0.5 * span;
            x_max = cx + 0.5 * span;
            y_min = cy - 0.5 * span;
            y_max = cy + 0.5 * span;
        }
        Frame {
            x_min,
            x_max,
            y_min,
            y_max,
            log_y: self.log_y,
            left,
            top,
            width,
            height,
        }
    }

    fn render_into(&self, out: &mut String, left: f64, top: f64, width: f64, height: f64) {
        let mut side = (width, height);
        if self.equal_axes {
            let s = width.min(height);
            side = (s, s);
        }
        let f = self.frame(left, top, side.0, side.1);
        let _ = writeln!(
            out,
            r#"<g class="plot" data-x-min="{}" data-x-max="{}" data-y-min="{}" data-y-max="{}" data-log-y="{}" data-left="{}" data-top="{}" data-width="{}" data-height="{}">"#,
            f.x_min, f.x_max, f.y_min, f.y_max, f.log_y, f.left, f.top, f.width, f.height
        );
        let _ = writeln!(
            out,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#444"/>"##,
            f.left, f.top, f.width, f.height
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="14">{}</text>"#,
            f.left + 0.5 * f.width,
            f.top - 10.0,
            escape(&self.title)
        );
        for tx in ticks(f.x_min, f.x_max, false) {
            if let Some((px, _)) = f.to_pixel(tx, if f.log_y { f.y_min } else { 0.0 }) {
                let y0 = f.top + f.height;
                let _ = writeln!(
                    out,
                    r##"<line x1="{px:.2}" y1="{y0:.2}" x2="{px:.2}" y2="{:.2}" stroke="#444"/><text x="{px:.2}" y="{:.2}" text-anchor="middle" font-size="11">{}</text>"##,
                    y0 + 5.0,
                    y0 + 18.0,
                    tick_label(tx)
                );
            }
        }
        for ty in ticks(f.y_min, f.y_max, f.log_y) {
            if let Some((_, py)) = f.to_pixel(f.x_min, ty) {
                let _ = writeln!(
                    out,
                    r##"<line x1="{:.2}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#444"/><text x="{:.2}" y="{:.2}" text-anchor="end" font-size="11">{}</text>"##,
                    f.left - 5.0,
                    f.left,
                    f.left - 8.0,
                    py + 4.0,
                    tick_label(ty)
                );
            }
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="12">{}</text>"#,
            f.left + 0.5 * f.width,
            f.top + f.height + 38.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="12" transform="rotate(-90 {:.2} {:.2})">{}</text>"#,
            f.left - 50.0,
            f.top + 0.5 * f.height,
            f.left - 50.0,
            f.top + 0.5 * f.height,
            escape(&self.y_label)
        );
        for (i, s) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let dash = if s.dashed {
                r#" stroke-dasharray="6 4""#
            } else {
                ""
            };
            // Unplottable points split the line into runs.
            let mut runs: Vec<Vec<(f64, f64)>> = vec![Vec::new()];
            for &(x, y) in &s.points {
                match f.to_pixel(x, y) {
                    Some(p) => runs.last_mut().unwrap().push(p),
                    None if !runs.last().unwrap().is_empty() => runs.push(Vec::new()),
                    None => {}
                }
            }
            for run in runs.iter().filter(|r| !r.is_empty()) {
                let pts: Vec<String> = run.iter().map(|(x, y)| format!("{x:.6},{y:.6}")).collect();
                let _ = writeln!(
                    out,
                    r#"<polyline class="series" data-name="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#,
                    escape(&s.name),
                    pts.join(" ")
                );
            }
            let ly = f.top + 16.0 + 16.0 * i as f64;
            let lx = f.left + f.width - 130.0;
            let _ = writeln!(
                out,
                r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"{dash}/><text x="{:.2}" y="{:.2}" font-size="11">{}</text>"#,
                lx + 20.0,
                lx + 25.0,
                ly + 4.0,
                escape(&s.name)
            );
        }
        out.push_str("</g>\n");
    }

    /// Renders the chart as a standalone SVG document.
    pub fn to_svg(&self) -> String {
        grid_svg(std::slice::from_ref(self), 1)
    }
}

/// Lays charts out on a grid with `columns` columns.
pub fn grid_svg(charts: &[Chart], columns: usize) -> String {
    let columns = columns.max(1);
    let rows = charts.len().div_ceil(columns).max(1);
    let (w, h) = (WIDTH * columns as f64, HEIGHT * rows as f64);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    for (i, c) in charts.iter().enumerate() {
        let (col, row) = ((i % columns) as f64, (i / columns) as f64);
        c.render_into(
            &mut out,
            col * WIDTH + MARGIN_LEFT,
            row * HEIGHT + MARGIN_TOP,
            WIDTH - MARGIN_LEFT - MARGIN_RIGHT,
            HEIGHT - MARGIN_TOP - MARGIN_BOTTOM,
        );
    }
    out.push_str("</svg>\n");
    out
}

fn tick_label(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.0e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn xy(points: &[Vector2<f64>]) -> Vec<(f64, f64)> {
    points.iter().map(|p| (p[0], p[1])).collect()
}

pub fn trajectory_chart(ep: &Episode) -> Chart {
    let mut c = Chart::new("Trajectories", "x (m)", "y (m)");
    c.equal_axes = true;
    c.series.push(Series::new(
        "target",
        ep.records
            .iter()
            .map(|r| (r.target_x, r.target_y))
            .collect(),
    ));
    c.series.push(Series::new(
        "AUV",
        ep.records.iter().map(|r| (r.auv_x, r.auv_y)).collect(),
    ));
    c
}

/// Tracking error, bound and ccbm against time.
pub fn error_chart(ep: &Episode, log_scale: bool) -> Chart {
    let mut c = Chart::new("Tracking error", "t (s)", "error (m) / ccbm");
    c.log_y = log_scale;
    c.series.push(Series::new(
        "avg_err",
        ep.records.iter().map(|r| (r.t, r.avg_err)).collect(),
    ));
    c.series
        .push(Series::new("bound", ep.records.iter().map(|r| (r.t, r.bound)).collect()).dashed());
    c.series
        .push(Series::new("ccbm", ep.records.iter().map(|r| (r.t, r.ccbm)).collect()).dashed());
    for b in &ep.baselines {
        c.series.push(Series::new(
            b.kind.name(),
            b.records.iter().map(|r| (r.t, r.avg_err)).collect(),
        ));
    }
    c
}

pub fn snapshot_chart(s: &Snapshot) -> Chart {
    let mut c = Chart::new(&format!("Prediction at t = {} s", s.t), "x (m)", "y (m)");
    c.equal_axes = true;
    c.series.push(Series::new("truth", xy(&s.truth)));
    c.series
        .push(Series::new("predicted", xy(&s.predicted)).dashed());
    c
}

/// Writes `{stem}_trajectory.svg`, `{stem}_error.svg` and `{stem}_snapshots.svg`.
pub fn emit_plots(
    ep: &Episode,
    log_scale: bool,
    out_dir: &Path,
    stem: &str,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| io_error(out_dir, e))?;
    let snapshots: Vec<Chart> = ep.snapshots.iter().map(snapshot_chart).collect();
    let files = [
        ("trajectory", trajectory_chart(ep).to_svg()),
        ("error", error_chart(ep, log_scale).to_svg()),
        ("snapshots", grid_svg(&snapshots, 2)),
    ];
    let mut paths = Vec::new();
    for (name, body) in files {
        let path = out_dir.join(format!("{stem}_{name}.svg"));
        std::fs::write(&path, body).map_err(|e| io_error(&path, e))?;
        paths.push(path);
    }
    Ok(paths)
}
