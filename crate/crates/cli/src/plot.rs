//! Minimal SVG line plots.

use std::fmt::Write as _;
use std::path::Path;

use rtw::align::EpochRecord;
use rtw::warpnet::WarpMatrix;
use rtw::{ManifoldDescriptor, Signal};

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];
const PANEL_W: f64 = 560.0;
const PANEL_H: f64 = 160.0;
const MARGIN: f64 = 40.0;

fn colour(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

struct Canvas {
    body: String,
    width: f64,
    height: f64,
}

impl Canvas {
    fn new(width: f64, height: f64, title: &str) -> Self {
        let mut c = Canvas { body: String::new(), width, height };
        c.text(width / 2.0, 20.0, title, "middle", 14);
        c
    }

    fn text(&mut self, x: f64, y: f64, s: &str, anchor: &str, size: u32) {
        let s = s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;");
        let _ = writeln!(self.body, r#"<text x="{x:.1}" y="{y:.1}" font-family="sans-serif" font-size="{size}" text-anchor="{anchor}">{s}</text>"#);
    }

    fn polyline(&mut self, pts: &[(f64, f64)], stroke: &str, width: f64) {
        if pts.is_empty() {
            return;
        }
        let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let _ = writeln!(self.body, r#"<polyline fill="none" stroke="{stroke}" stroke-width="{width}" points="{}"/>"#, coords.join(" "));
    }

    fn frame(&mut self, x: f64, y: f64, w: f64, h: f64) {
        let _ = writeln!(self.body, r##"<rect x="{x:.1}" y="{y:.1}" width="{w:.1}" height="{h:.1}" fill="none" stroke="#888"/>"##);
    }

    /// Draws `series` into the box `(x, y, w, h)` with shared bounds.
    fn panel(&mut self, x: f64, y: f64, w: f64, h: f64, label: &str, series: &[(Vec<(f64, f64)>, &str, f64)]) {
        self.frame(x, y, w, h);
        self.text(x + 4.0, y + 12.0, label, "start", 10);
        let all = series.iter().flat_map(|(s, _, _)| s.iter());
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(a, b) in all {
            x0 = x0.min(a);
            x1 = x1.max(a);
            y0 = y0.min(b);
            y1 = y1.max(b);
        }
        if !x0.is_finite() {
            return;
        }
        if x1 - x0 < 1e-12 {
            x1 = x0 + 1.0;
        }
        if y1 - y0 < 1e-12 {
            y0 -= 0.5;
            y1 += 0.5;
        }
        self.text(x - 4.0, y + 10.0, &format!("{y1:.3}"), "end", 9);
        self.text(x - 4.0, y + h, &format!("{y0:.3}"), "end", 9);
        for (s, stroke, width) in series {
            let pts: Vec<(f64, f64)> = s.iter().map(|&(a, b)| (x + (a - x0) / (x1 - x0) * w, y + h - (b - y0) / (y1 - y0) * h)).collect();
            self.polyline(&pts, stroke, *width);
        }
    }

    fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.body,
            w = self.width,
            h = self.height
        )
    }
}

fn time_axis(len: usize) -> impl Iterator<Item = f64> {
    (0..len).map(move |i| i as f64 / (len.max(2) - 1) as f64)
}

/// Circle signals drawn by angle, with the radius growing with time.
fn circle_plot(signals: &[&Signal<f64>], mean: Option<&Signal<f64>>, title: &str) -> String {
    let size = 420.0;
    let mut c = Canvas::new(size, size + 30.0, title);
    let (cx, cy, r) = (size / 2.0, size / 2.0 + 30.0, size / 2.0 - MARGIN);
    let _ = writeln!(c.body, r##"<circle cx="{cx:.1}" cy="{cy:.1}" r="{r:.1}" fill="none" stroke="#ccc"/>"##);
    let trace = |s: &Signal<f64>| -> Vec<(f64, f64)> {
        s.points()
            .zip(time_axis(s.len()))
            .map(|(p, t)| {
                let a = p[1].atan2(p[0]);
                let rad = r * (0.25 + 0.75 * t);
                (cx + rad * a.cos(), cy - rad * a.sin())
            })
            .collect()
    };
    for (i, s) in signals.iter().enumerate() {
        c.polyline(&trace(s), colour(i), 1.2);
    }
    if let Some(m) = mean {
        c.polyline(&trace(m), "black", 2.5);
    }
    c.finish()
}

/// One panel per ambient coordinate against normalized time.
pub fn signals_svg(desc: &ManifoldDescriptor, signals: &[&Signal<f64>], mean: Option<&Signal<f64>>, title: &str) -> String {
    if *desc == ManifoldDescriptor::Sphere(1) {
        return circle_plot(signals, mean, title);
    }
    let width = desc.ambient_dim().max(1);
    let mut c = Canvas::new(PANEL_W + 2.0 * MARGIN, 30.0 + width as f64 * (PANEL_H + 20.0) + 10.0, title);
    for k in 0..width {
        let y = 30.0 + k as f64 * (PANEL_H + 20.0);
        let mut series: Vec<(Vec<(f64, f64)>, &str, f64)> = signals
            .iter()
            .enumerate()
            .map(|(i, s)| (s.points().zip(time_axis(s.len())).map(|(p, t)| (t, p[k])).collect(), colour(i), 1.2))
            .collect();
        if let Some(m) = mean {
            series.push((m.points().zip(time_axis(m.len())).map(|(p, t)| (t, p[k])).collect(), "black", 2.5));
        }
        c.panel(MARGIN, y, PANEL_W, PANEL_H, &format!("coordinate {k}"), &series);
    }
    c.finish()
}

/// Warping curves `gamma_n` against normalized output index.
pub fn warps_svg(gamma: &WarpMatrix<f64>, title: &str) -> String {
    let side = 360.0;
    let mut c = Canvas::new(side + 2.0 * MARGIN, side + 2.0 * MARGIN, title);
    let mut series: Vec<(Vec<(f64, f64)>, &str, f64)> = vec![(vec![(0.0, 0.0), (1.0, 1.0)], "#bbb", 1.0)];
    for (i, row) in gamma.rows().enumerate() {
        series.push((time_axis(row.len()).zip(row.iter().copied()).collect(), colour(i), 1.5));
    }
    c.panel(MARGIN, MARGIN, side, side, "warp", &series);
    c.finish()
}

pub fn loss_svg(trace: &[EpochRecord], title: &str) -> String {
    let mut c = Canvas::new(PANEL_W + 2.0 * MARGIN, PANEL_H + 2.0 * MARGIN, title);
    let series = vec![
        (trace.iter().map(|r| (r.epoch as f64, r.objective.max(1e-300).log10())).collect(), colour(0), 1.5),
        (trace.iter().map(|r| (r.epoch as f64, r.data_loss.max(1e-300).log10())).collect(), colour(1), 1.0),
    ];
    c.panel(MARGIN, MARGIN, PANEL_W, PANEL_H, "log10 objective / data loss", &series);
    c.finish()
}

pub fn write(path: &Path, svg: String) -> std::io::Result<()> {
    std::fs::write(path, svg)
}
