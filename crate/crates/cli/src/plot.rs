//! Minimal SVG line plots and heatmaps.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 52.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub struct Series<'a> {
    pub label: &'a str,
    pub x: &'a [f64],
    pub y: &'a [f64],
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
        let pad = hi.abs().max(1.0) * 0.5;
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

/// About five round tick values covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn label(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 {
        "0".into()
    } else if !(1e-3..1e4).contains(&a) {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn header(s: &mut String, title: &str) {
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        W / 2.0,
        escape(title)
    );
}

fn axes(s: &mut String, x: (f64, f64), y: (f64, f64), xlabel: &str, ylabel: &str, right: f64) {
    let (x0, x1, y0, y1) = (LEFT, W - right, H - BOTTOM, TOP);
    let _ = writeln!(
        s,
        r#"<rect x="{x0}" y="{y1}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y0 - y1
    );
    for t in ticks(x.0, x.1) {
        let px = x0 + (t - x.0) / (x.1 - x.0) * (x1 - x0);
        let _ = writeln!(s, r#"<line x1="{px:.2}" y1="{y0}" x2="{px:.2}" y2="{}" stroke="black"/>"#, y0 + 5.0);
        let _ = writeln!(
            s,
            r#"<text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"#,
            y0 + 18.0,
            label(t)
        );
    }
    for t in ticks(y.0, y.1) {
        let py = y0 - (t - y.0) / (y.1 - y.0) * (y0 - y1);
        let _ = writeln!(s, r#"<line x1="{}" y1="{py:.2}" x2="{x0}" y2="{py:.2}" stroke="black"/>"#, x0 - 5.0);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 8.0,
            py + 4.0,
            label(t)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        H - 12.0,
        escape(xlabel)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
        (y0 + y1) / 2.0,
        escape(ylabel)
    );
}

pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let mut s = String::new();
    header(&mut s, title);
    let xr = range(series.iter().flat_map(|c| c.x.iter().copied()));
    let yr = range(series.iter().flat_map(|c| c.y.iter().copied()));
    axes(&mut s, xr, yr, xlabel, ylabel, RIGHT);
    let (x0, x1, y0, y1) = (LEFT, W - RIGHT, H - BOTTOM, TOP);
    for (k, c) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut path = String::new();
        let mut pen = 'M';
        for (&x, &y) in c.x.iter().zip(c.y) {
            if !(x.is_finite() && y.is_finite()) {
                pen = 'M';
                continue;
            }
            let px = x0 + (x - xr.0) / (xr.1 - xr.0) * (x1 - x0);
            let py = y0 - (y - yr.0) / (yr.1 - yr.0) * (y0 - y1);
            let _ = write!(path, "{pen}{px:.2},{py:.2} ");
            pen = 'L';
        }
        let _ = writeln!(
            s,
            r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.2"/>"#,
            path.trim_end()
        );
        if series.len() > 1 {
            let ly = y1 + 16.0 + 16.0 * k as f64;
            let _ = writeln!(
                s,
                r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
                x1 - 150.0,
                x1 - 130.0
            );
            let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, x1 - 125.0, ly + 4.0, escape(c.label));
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Blue-white-red for `t` in `[-1, 1]`.
fn diverging(t: f64) -> String {
    let t = t.clamp(-1.0, 1.0);
    let (r, g, b) = if t >= 0.0 {
        (1.0, 1.0 - t, 1.0 - t)
    } else {
        (1.0 + t, 1.0 + t, 1.0)
    };
    let q = |v: f64| (v * 255.0).round() as u8;
    format!("#{:02x}{:02x}{:02x}", q(r), q(g), q(b))
}

/// Heatmap of row-major `values[i * y.len() + j]` at `(x[i], y[j])`, colored
/// by `asinh(v / scale)`, normalized to the largest magnitude.
pub fn heatmap(title: &str, xlabel: &str, ylabel: &str, x: &[f64], y: &[f64], values: &[f64], scale: f64) -> String {
    let mut s = String::new();
    header(&mut s, title);
    let bar = 70.0;
    let xr = range(x.iter().copied());
    let yr = range(y.iter().copied());
    axes(&mut s, xr, yr, xlabel, ylabel, RIGHT + bar);
    let (x0, x1, y0, y1) = (LEFT, W - RIGHT - bar, H - BOTTOM, TOP);
    let scale = if scale > 0.0 && scale.is_finite() { scale } else { 1.0 };
    let mapped: Vec<f64> = values.iter().map(|v| (v / scale).asinh()).collect();
    let top = mapped.iter().filter(|v| v.is_finite()).fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let cell = |grid: &[f64], k: usize, lo: f64, hi: f64, p0: f64, p1: f64| {
        let half = if grid.len() > 1 {
            (grid[1] - grid[0]).abs() / 2.0
        } else {
            (hi - lo) / 2.0
        };
        let a = p0 + (grid[k] - half - lo) / (hi - lo) * (p1 - p0);
        let b = p0 + (grid[k] + half - lo) / (hi - lo) * (p1 - p0);
        (a.min(b).max(p0.min(p1)), a.max(b).min(p0.max(p1)))
    };
    for i in 0..x.len() {
        let (ax, bx) = cell(x, i, xr.0, xr.1, x0, x1);
        for j in 0..y.len() {
            let (ay, by) = cell(y, j, yr.0, yr.1, y0, y1);
            let v = mapped[i * y.len() + j];
            let color = if v.is_finite() { diverging(v / top) } else { "#808080".into() };
            let _ = writeln!(
                s,
                r#"<rect x="{ax:.2}" y="{ay:.2}" width="{:.2}" height="{:.2}" fill="{color}"/>"#,
                bx - ax + 0.3,
                by - ay + 0.3
            );
        }
    }
    let bx = W - RIGHT - bar + 20.0;
    let steps = 40;
    let h = (y0 - y1) / steps as f64;
    for k in 0..steps {
        let t = 1.0 - 2.0 * (k as f64 + 0.5) / steps as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{bx}" y="{:.2}" width="14" height="{:.2}" fill="{}"/>"#,
            y1 + k as f64 * h,
            h + 0.3,
            diverging(t)
        );
    }
    let edge = scale * top.sinh();
    let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, bx + 18.0, y1 + 8.0, label(edge));
    let _ = writeln!(s, r#"<text x="{}" y="{}">0</text>"#, bx + 18.0, (y0 + y1) / 2.0 + 4.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, bx + 18.0, y0, label(-edge));
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="10" text-anchor="end">asinh scale {}</text>"#,
        W - 4.0,
        y0 + 30.0,
        label(scale)
    );
    s.push_str("</svg>\n");
    s
}
