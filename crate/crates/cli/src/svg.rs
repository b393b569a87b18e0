//! Plain SVG renderings of rootograms, Q-Q plots and Pearson residual plots.
//!
//! Numbers are written with two decimals so output is byte-for-byte stable.

use std::fmt::Write;

use countdiag::diagnostics::{BootstrapBand, QqCoords};
use countdiag::rootogram::{RootogramCoords, Scale};
use countdiag::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 44.0;

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Result<Frame> {
        let (x0, x1) = range(xs)?;
        let (y0, y1) = range(ys)?;
        Ok(Frame { x0, x1, y0, y1 })
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }

    fn scale_x(&self, dx: f64) -> f64 {
        dx / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }
}

fn range(v: impl Iterator<Item = f64>) -> Result<(f64, f64)> {
    let (lo, hi) = v
        .filter(|x| x.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if !lo.is_finite() {
        return Err(Error::Config("nothing to draw".into()));
    }
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5 };
    Ok((lo - pad, hi + pad))
}

fn n(x: f64) -> String {
    let s = format!("{x:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn points(f: &Frame, xs: &[f64], ys: &[f64]) -> String {
    xs.iter()
        .zip(ys)
        .filter(|(_, y)| y.is_finite())
        .map(|(&x, &y)| format!("{},{}", n(f.px(x)), n(f.py(y))))
        .collect::<Vec<_>>()
        .join(" ")
}

fn open(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#,
        w = WIDTH,
        h = HEIGHT
    );
    let _ = writeln!(
        s,
        r#"<text class="title" x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#,
        n(WIDTH / 2.0),
        escape(title)
    );
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn hline(s: &mut String, f: &Frame, y: f64, class: &str, dash: bool) {
    let _ = writeln!(
        s,
        r#"<line class="{class}" x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="black" stroke-width="1"{}/>"#,
        n(LEFT),
        n(WIDTH - RIGHT),
        if dash { r#" stroke-dasharray="4 3""# } else { "" },
        y = n(f.py(y)),
    );
}

/// Tick positions every `step` covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let raw = (hi - lo) / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|&s| s >= raw)
        .unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * step {
        out.push(if t.abs() < 1e-12 { 0.0 } else { t });
        t += step;
    }
    out
}

fn label(v: f64) -> String {
    if (v - v.round()).abs() < 1e-9 {
        format!("{}", v.round() as i64)
    } else {
        let s = format!("{v:.2}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn y_axis(s: &mut String, f: &Frame, tick_values: &[(f64, String)]) {
    let _ = writeln!(
        s,
        r#"<line class="axis" x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="black"/>"#,
        n(TOP),
        n(HEIGHT - BOTTOM),
        x = n(LEFT)
    );
    for (v, text) in tick_values {
        let y = n(f.py(*v));
        let _ = writeln!(
            s,
            r#"<text class="tick" x="{}" y="{y}" text-anchor="end" dominant-baseline="middle">{text}</text>"#,
            n(LEFT - 6.0)
        );
    }
}

fn x_axis(s: &mut String, f: &Frame, tick_values: &[f64], name: &str) {
    let _ = writeln!(
        s,
        r#"<line class="axis" x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="black"/>"#,
        n(LEFT),
        n(WIDTH - RIGHT),
        y = n(HEIGHT - BOTTOM)
    );
    for &v in tick_values {
        let _ = writeln!(
            s,
            r#"<text class="tick" x="{}" y="{}" text-anchor="middle">{}</text>"#,
            n(f.px(v)),
            n(HEIGHT - BOTTOM + 14.0),
            label(v)
        );
    }
    let _ = writeln!(
        s,
        r#"<text class="xlabel" x="{}" y="{}" text-anchor="middle">{name}</text>"#,
        n(LEFT + (WIDTH - LEFT - RIGHT) / 2.0),
        n(HEIGHT - 8.0)
    );
}

/// Rootogram bars, expected curve and reference line. With `band`, the ±1
/// warning limits are dashed and the bootstrap band is drawn as two solid lines.
pub fn rootogram(c: &RootogramCoords, band: Option<&BootstrapBand>, title: &str) -> Result<String> {
    if c.bin_centers.is_empty() {
        return Err(Error::Config("cannot draw a rootogram with no bins".into()));
    }
    let half = c.bar_width / 2.0;
    let xs = c.bin_centers.iter().flat_map(|&x| [x - half, x + half]);
    let mut ys: Vec<f64> = c.bar_bottom.iter().chain(&c.bar_top).chain(&c.expected_curve).copied().collect();
    ys.push(c.reference_line);
    if let Some(b) = band {
        ys.extend(b.lower.iter().chain(&b.upper));
        ys.extend([b.warning_limits.0, b.warning_limits.1]);
    }
    let f = Frame::new(xs, ys.iter().copied())?;

    let mut s = open(title);
    for j in 0..c.bin_centers.len() {
        let (lo, hi) = {
            let (a, b) = (c.bar_bottom[j], c.bar_top[j]);
            (a.min(b), a.max(b))
        };
        let _ = writeln!(
            s,
            r#"<rect class="bar" x="{}" y="{}" width="{}" height="{}" fill="lightgray" stroke="gray"/>"#,
            n(f.px(c.bin_centers[j] - half)),
            n(f.py(hi)),
            n(f.scale_x(c.bar_width)),
            n(f.py(lo) - f.py(hi))
        );
    }
    let _ = writeln!(
        s,
        r#"<polyline class="expected" points="{}" fill="none" stroke="firebrick" stroke-width="2"/>"#,
        points(&f, &c.bin_centers, &c.expected_curve)
    );
    hline(&mut s, &f, c.reference_line, "reference", false);
    if let Some(b) = band {
        hline(&mut s, &f, b.warning_limits.0, "limit", true);
        hline(&mut s, &f, b.warning_limits.1, "limit", true);
        for (class, v) in [("band-lower", &b.lower), ("band-upper", &b.upper)] {
            let _ = writeln!(
                s,
                r#"<polyline class="{class}" points="{}" fill="none" stroke="steelblue" stroke-width="1.5"/>"#,
                points(&f, &b.bin_centers, v)
            );
        }
    }

    let y_ticks: Vec<(f64, String)> = match c.scale {
        Scale::Sqrt => {
            let lo = f.y0.ceil() as i64;
            let hi = f.y1.floor() as i64;
            let step = ((hi - lo) / 8).max(1);
            (lo..=hi)
                .filter(|k| k % step == 0)
                .map(|k| (k as f64, if k < 0 { format!("-{}", k * k) } else { (k * k).to_string() }))
                .collect()
        }
        Scale::Raw => ticks(f.y0, f.y1, 8).into_iter().map(|v| (v, label(v))).collect(),
    };
    y_axis(&mut s, &f, &y_ticks);
    let last = *c.bin_centers.last().unwrap();
    let first = c.bin_centers[0];
    x_axis(&mut s, &f, &ticks(first, last, 10), "count");
    s.push_str("</svg>\n");
    Ok(s)
}

/// Sample vs theoretical quantiles with the pointwise envelope.
pub fn qq(q: &QqCoords, title: &str) -> Result<String> {
    if q.sample.is_empty() {
        return Err(Error::Config("cannot draw a Q-Q plot with no points".into()));
    }
    let ys = q.sample.iter().chain(&q.lower).chain(&q.upper).copied();
    let f = Frame::new(q.theoretical.iter().copied(), ys)?;
    let mut s = open(title);

    let upper = points(&f, &q.theoretical, &q.upper);
    let lower: Vec<String> = q
        .theoretical
        .iter()
        .zip(&q.lower)
        .rev()
        .map(|(&x, &y)| format!("{},{}", n(f.px(x)), n(f.py(y))))
        .collect();
    let _ = writeln!(
        s,
        r#"<polygon class="envelope" points="{upper} {}" fill="lightsteelblue" fill-opacity="0.6" stroke="none"/>"#,
        lower.join(" ")
    );
    let lo = f.x0.max(f.y0);
    let hi = f.x1.min(f.y1);
    let _ = writeln!(
        s,
        r#"<line class="diagonal" x1="{}" y1="{}" x2="{}" y2="{}" stroke="gray"/>"#,
        n(f.px(lo)),
        n(f.py(lo)),
        n(f.px(hi)),
        n(f.py(hi))
    );
    for (&x, &y) in q.theoretical.iter().zip(&q.sample) {
        let _ = writeln!(
            s,
            r#"<circle class="point" cx="{}" cy="{}" r="1.8" fill="black"/>"#,
            n(f.px(x)),
            n(f.py(y))
        );
    }
    let yt: Vec<(f64, String)> = ticks(f.y0, f.y1, 8).into_iter().map(|v| (v, label(v))).collect();
    y_axis(&mut s, &f, &yt);
    x_axis(&mut s, &f, &ticks(f.x0, f.x1, 8), "theoretical quantile");
    s.push_str("</svg>\n");
    Ok(s)
}

/// Pearson residuals against fitted means.
pub fn pearson(means: &[f64], residuals: &[f64], title: &str) -> Result<String> {
    if residuals.is_empty() {
        return Err(Error::Config("cannot draw an empty residual plot".into()));
    }
    let ys = residuals.iter().copied().chain([0.0]);
    let f = Frame::new(means.iter().copied(), ys)?;
    let mut s = open(title);
    hline(&mut s, &f, 0.0, "reference", true);
    for (&x, &y) in means.iter().zip(residuals) {
        let _ = writeln!(
            s,
            r#"<circle class="point" cx="{}" cy="{}" r="1.8" fill="black"/>"#,
            n(f.px(x)),
            n(f.py(y))
        );
    }
    let yt: Vec<(f64, String)> = ticks(f.y0, f.y1, 8).into_iter().map(|v| (v, label(v))).collect();
    y_axis(&mut s, &f, &yt);
    x_axis(&mut s, &f, &ticks(f.x0, f.x1, 8), "fitted mean");
    s.push_str("</svg>\n");
    Ok(s)
}
