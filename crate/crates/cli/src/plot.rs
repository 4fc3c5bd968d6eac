//! Minimal SVG line charts for `--plot`.

use std::fmt::Write;

const WIDTH: f64 = 720.0;
const PANEL_HEIGHT: f64 = 170.0;
const MARGIN: f64 = 48.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// One chart: several labelled series sharing an x and y scale.
#[derive(Debug, Clone)]
pub struct Panel {
    pub title: String,
    pub lines: Vec<(String, Vec<f64>)>,
}

fn bounds(panel: &Panel) -> (usize, f64, f64) {
    let len = panel.lines.iter().map(|l| l.1.len()).max().unwrap_or(0);
    let vals = panel.lines.iter().flat_map(|l| l.1.iter()).filter(|v| v.is_finite());
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    if !lo.is_finite() {
        return (len, 0.0, 1.0);
    }
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5 };
    (len, lo - pad, hi + pad)
}

/// Renders panels stacked vertically.
pub fn render(panels: &[Panel]) -> String {
    let height = PANEL_HEIGHT * panels.len() as f64;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (p, panel) in panels.iter().enumerate() {
        let top = p as f64 * PANEL_HEIGHT;
        let (len, lo, hi) = bounds(panel);
        let (x0, x1) = (MARGIN, WIDTH - 12.0);
        let (y0, y1) = (top + PANEL_HEIGHT - 24.0, top + 22.0);
        let sx = |i: usize| x0 + (x1 - x0) * i as f64 / (len.max(2) - 1) as f64;
        let sy = |v: f64| y0 + (y1 - y0) * (v - lo) / (hi - lo);
        let _ = writeln!(s, r#"<text x="{x0}" y="{}" font-weight="bold">{}</text>"#, top + 14.0, escape(&panel.title));
        let _ = writeln!(s, r##"<rect x="{x0}" y="{y1}" width="{}" height="{}" fill="none" stroke="#999"/>"##, x1 - x0, y0 - y1);
        let _ = writeln!(s, r#"<text x="4" y="{}">{}</text>"#, y1 + 8.0, fmt_tick(hi));
        let _ = writeln!(s, r#"<text x="4" y="{y0}">{}</text>"#, fmt_tick(lo));
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, x1, y0 + 14.0, len.saturating_sub(1));
        if lo < 0.0 && hi > 0.0 {
            let z = sy(0.0);
            let _ = writeln!(s, r##"<line x1="{x0}" x2="{x1}" y1="{z:.1}" y2="{z:.1}" stroke="#ccc"/>"##);
        }
        for (k, (label, v)) in panel.lines.iter().enumerate() {
            let color = COLORS[k % COLORS.len()];
            // Long traces are thinned to at most ~2000 vertices.
            let step = (v.len() / 2000).max(1);
            let pts: Vec<String> = v
                .iter()
                .enumerate()
                .step_by(step)
                .filter(|(_, y)| y.is_finite())
                .map(|(i, y)| format!("{:.1},{:.1}", sx(i), sy(*y)))
                .collect();
            let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1" points="{}"/>"#, pts.join(" "));
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" fill="{color}" text-anchor="end">{}</text>"#,
                x1 - 4.0,
                y1 + 12.0 + 12.0 * k as f64,
                escape(label)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

fn fmt_tick(v: f64) -> String {
    if v.abs() >= 1e4 || (v != 0.0 && v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
