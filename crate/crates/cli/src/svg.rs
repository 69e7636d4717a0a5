//! Minimal 500×300 line plots with a logarithmic x axis.

use std::fmt::Write as _;

const WIDTH: f64 = 500.0;
const HEIGHT: f64 = 300.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 40.0;

#[derive(Debug, Clone)]
pub struct Plot {
    pub title: String,
    /// `(x, y)` with `x > 0`.
    pub points: Vec<(f64, f64)>,
    /// Drawn as a horizontal rule.
    pub target: Option<f64>,
    /// Extrapolated value, drawn as a dashed rule.
    pub limit: Option<f64>,
    pub x_label: String,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

pub fn render(plot: &Plot) -> String {
    let pts: Vec<(f64, f64)> = plot
        .points
        .iter()
        .copied()
        .filter(|(x, y)| *x > 0.0 && x.is_finite() && y.is_finite())
        .collect();
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        out,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="18" text-anchor="middle" font-size="13">{}</text>"#,
        WIDTH / 2.0,
        escape(&plot.title)
    );
    if pts.is_empty() {
        out.push_str("</svg>\n");
        return out;
    }

    let (mut x0, mut x1) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
            (a.min(p.0.log10()), b.max(p.0.log10()))
        });
    if x1 - x0 < 1e-12 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    let ys = pts.iter().map(|p| p.1).chain(plot.target).chain(plot.limit);
    let (mut y0, mut y1) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| {
        (a.min(y), b.max(y))
    });
    let pad = ((y1 - y0) * 0.08).max(1e-12 * y1.abs().max(1.0));
    y0 -= pad;
    y1 += pad;

    let px = |x: f64| LEFT + (x.log10() - x0) / (x1 - x0) * (WIDTH - LEFT - RIGHT);
    let py = |y: f64| HEIGHT - BOTTOM - (y - y0) / (y1 - y0) * (HEIGHT - TOP - BOTTOM);

    let _ = writeln!(
        out,
        r##"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
        WIDTH - LEFT - RIGHT,
        HEIGHT - TOP - BOTTOM
    );
    for d in (x0.ceil() as i32)..=(x1.floor() as i32) {
        let x = px(10f64.powi(d));
        let _ = writeln!(
            out,
            r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#ddd"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">1e{d}</text>"##,
            TOP,
            HEIGHT - BOTTOM,
            HEIGHT - BOTTOM + 14.0
        );
    }
    for k in 0..=4 {
        let y = y0 + (y1 - y0) * k as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 4.0,
            py(y) + 4.0,
            format_tick(y)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        HEIGHT - 6.0,
        escape(&plot.x_label)
    );

    let (xa, xb) = (LEFT, WIDTH - RIGHT);
    if let Some(t) = plot.target {
        let y = py(t);
        let _ = writeln!(
            out,
            r##"<line x1="{xa}" y1="{y:.2}" x2="{xb}" y2="{y:.2}" stroke="#c0392b"/>"##
        );
    }
    if let Some(l) = plot.limit {
        let y = py(l);
        let _ = writeln!(
            out,
            r##"<line x1="{xa}" y1="{y:.2}" x2="{xb}" y2="{y:.2}" stroke="#27ae60" stroke-dasharray="4 3"/>"##
        );
    }
    let mut sorted = pts.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let path: Vec<String> = sorted
        .iter()
        .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
        .collect();
    let _ = writeln!(
        out,
        r##"<polyline points="{}" fill="none" stroke="#2c3e50" stroke-width="1.5"/>"##,
        path.join(" ")
    );
    for &(x, y) in &sorted {
        let _ = writeln!(
            out,
            r##"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="#2c3e50"/>"##,
            px(x),
            py(y)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn format_tick(y: f64) -> String {
    if y != 0.0 && (y.abs() < 1e-3 || y.abs() >= 1e5) {
        format!("{y:.2e}")
    } else {
        format!("{y:.4}")
    }
}
