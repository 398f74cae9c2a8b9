//! Standalone SVG line plots.

use std::fmt::Write;

use crate::diagnostics::log_log_fit;
use crate::error::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 55.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn fit(points: impl Iterator<Item = (f64, f64)>) -> Option<Self> {
        let mut f = Frame {
            x0: f64::INFINITY,
            x1: f64::NEG_INFINITY,
            y0: f64::INFINITY,
            y1: f64::NEG_INFINITY,
        };
        let mut any = false;
        for (x, y) in points {
            if x.is_finite() && y.is_finite() {
                any = true;
                f.x0 = f.x0.min(x);
                f.x1 = f.x1.max(x);
                f.y0 = f.y0.min(y);
                f.y1 = f.y1.max(y);
            }
        }
        if !any {
            return None;
        }
        if f.x1 == f.x0 {
            f.x0 -= 0.5;
            f.x1 += 0.5;
        }
        if f.y1 == f.y0 {
            let pad = 0.5 * f.y0.abs().max(1.0);
            f.y0 -= pad;
            f.y1 += pad;
        }
        Some(f)
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN_LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN_BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn axes(svg: &mut String, f: &Frame, title: &str, x_label: &str, y_label: &str, tick: impl Fn(f64) -> String) {
    let (l, r) = (MARGIN_LEFT, WIDTH - MARGIN_RIGHT);
    let (t, b) = (MARGIN_TOP, HEIGHT - MARGIN_BOTTOM);
    let _ = writeln!(
        svg,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"##
    );
    let _ = writeln!(svg, r##"<rect width="100%" height="100%" fill="white"/>"##);
    let _ = writeln!(svg, r##"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"##, WIDTH / 2.0, escape(title));
    let _ = writeln!(svg, r##"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="black"/>"##, r - l, b - t);
    for i in 0..=4 {
        let s = i as f64 / 4.0;
        let xv = f.x0 + s * (f.x1 - f.x0);
        let yv = f.y0 + s * (f.y1 - f.y0);
        let (xp, yp) = (f.px(xv), f.py(yv));
        let _ = writeln!(svg, r##"<line x1="{xp:.2}" y1="{b}" x2="{xp:.2}" y2="{}" stroke="black"/>"##, b + 5.0);
        let _ = writeln!(svg, r##"<text x="{xp:.2}" y="{}" text-anchor="middle">{}</text>"##, b + 18.0, tick(xv));
        let _ = writeln!(svg, r##"<line x1="{}" y1="{yp:.2}" x2="{l}" y2="{yp:.2}" stroke="black"/>"##, l - 5.0);
        let _ = writeln!(svg, r##"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"##, l - 8.0, yp + 4.0, tick(yv));
    }
    let _ = writeln!(svg, r##"<text x="{}" y="{}" text-anchor="middle">{}</text>"##, (l + r) / 2.0, HEIGHT - 12.0, escape(x_label));
    let _ = writeln!(
        svg,
        r##"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"##,
        (t + b) / 2.0,
        escape(y_label)
    );
}

fn polyline(svg: &mut String, f: &Frame, xs: &[f64], ys: &[f64], color: &str) {
    let pts: Vec<String> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .map(|(x, y)| format!("{:.2},{:.2}", f.px(*x), f.py(*y)))
        .collect();
    let _ = writeln!(svg, r##"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"##, pts.join(" "));
}

/// Several series against a shared linear axis.
pub fn line_plot(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> Result<String> {
    let frame = Frame::fit(series.iter().flat_map(|s| s.x.iter().copied().zip(s.y.iter().copied())))
        .ok_or_else(|| Error::config(format!("nothing to plot for `{title}`")))?;
    let mut svg = String::new();
    axes(&mut svg, &frame, title, x_label, y_label, |v| format!("{v:.3}"));
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        polyline(&mut svg, &frame, &s.x, &s.y, color);
        let _ = writeln!(
            svg,
            r##"<text x="{}" y="{}" fill="{color}">{}</text>"##,
            MARGIN_LEFT + 10.0,
            MARGIN_TOP + 16.0 * (i + 1) as f64,
            escape(&s.name)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Log–log scatter of `y` against `x` with the least-squares line drawn as one segment and
/// its slope in the legend.
pub fn log_log_plot(title: &str, x_label: &str, y_label: &str, x: &[f64], y: &[f64]) -> Result<String> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0 && a.is_finite() && b.is_finite())
        .map(|(a, b)| (*a, *b))
        .collect();
    if pts.len() < 2 {
        return Err(Error::config(format!("`{title}` needs at least two positive points for a log–log plot")));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = pts.iter().copied().unzip();
    let (slope, intercept, r2) = log_log_fit(&xs, &ys);
    let lx: Vec<f64> = xs.iter().map(|v| v.log10()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.log10()).collect();
    let frame = Frame::fit(lx.iter().copied().zip(ly.iter().copied())).expect("points are finite");
    let mut svg = String::new();
    axes(&mut svg, &frame, title, x_label, y_label, |v| format!("{:.2e}", 10f64.powf(v)));
    polyline(&mut svg, &frame, &lx, &ly, COLORS[0]);
    for (a, b) in lx.iter().zip(&ly) {
        let _ = writeln!(svg, r##"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{}"/>"##, frame.px(*a), frame.py(*b), COLORS[0]);
    }
    let (a0, a1) = (frame.x0, frame.x1);
    let fit = |lxv: f64| (intercept + slope * lxv * std::f64::consts::LN_10) / std::f64::consts::LN_10;
    let _ = writeln!(
        svg,
        r##"<line class="fit" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{}" stroke-dasharray="6 4" stroke-width="1.5"/>"##,
        frame.px(a0),
        frame.py(fit(a0)),
        frame.px(a1),
        frame.py(fit(a1)),
        COLORS[1]
    );
    let _ = writeln!(
        svg,
        r##"<text x="{}" y="{}" fill="{}">fitted slope {slope:.3} (r² = {r2:.4})</text>"##,
        MARGIN_LEFT + 10.0,
        MARGIN_TOP + 16.0,
        COLORS[1]
    );
    svg.push_str("</svg>\n");
    Ok(svg)
}
