//! Minimal SVG charts for run outputs.

use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 60.0;
const PALETTE: [&str; 9] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#17becf",
];

pub struct Series<'a> {
    pub name: &'a str,
    pub points: Vec<(f64, f64)>,
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-300 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Keeps at most `max` points, taking the min and max of each bucket so
/// fast oscillations keep their envelope.
pub fn decimate(points: &[(f64, f64)], max: usize) -> Vec<(f64, f64)> {
    if points.len() <= max || max < 4 {
        return points.to_vec();
    }
    let bucket = points.len().div_ceil(max / 2);
    let mut out = Vec::with_capacity(max + 2);
    for chunk in points.chunks(bucket) {
        let lo = chunk
            .iter()
            .copied()
            .fold(chunk[0], |a, b| if b.1 < a.1 { b } else { a });
        let hi = chunk
            .iter()
            .copied()
            .fold(chunk[0], |a, b| if b.1 > a.1 { b } else { a });
        if lo.0 <= hi.0 {
            out.extend([lo, hi]);
        } else {
            out.extend([hi, lo]);
        }
    }
    out
}

fn frame(svg: &mut String, title: &str, xlabel: &str, ylabel: &str, x: (f64, f64), y: (f64, f64)) {
    let _ = write!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">
<rect width="100%" height="100%" fill="white"/>
<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>
<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>
<text x="{}" y="{}" text-anchor="middle">{}</text>
<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">{}</text>
"#,
        WIDTH / 2.0,
        escape(title),
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN,
        WIDTH / 2.0,
        HEIGHT - 15.0,
        escape(xlabel),
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(ylabel),
    );
    for (v, px) in [(x.0, MARGIN), (x.1, WIDTH - MARGIN)] {
        let _ = writeln!(
            svg,
            r#"<text x="{px}" y="{}" text-anchor="middle">{v:.4}</text>"#,
            HEIGHT - MARGIN + 15.0
        );
    }
    for (v, py) in [(y.0, HEIGHT - MARGIN), (y.1, MARGIN)] {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{py}" text-anchor="end">{v:.4}</text>"#,
            MARGIN - 4.0
        );
    }
}

pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series<'_>]) -> String {
    let x = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let y = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let sx = |v: f64| MARGIN + (v - x.0) / (x.1 - x.0) * (WIDTH - 2.0 * MARGIN);
    let sy = |v: f64| HEIGHT - MARGIN - (v - y.0) / (y.1 - y.0) * (HEIGHT - 2.0 * MARGIN);
    let mut svg = String::new();
    frame(&mut svg, title, xlabel, ylabel, x, y);
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = s
            .points
            .iter()
            .map(|&(a, b)| format!("{:.2},{:.2}", sx(a), sy(b)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1" points="{}"/>"#,
            path.join(" ")
        );
        let ly = MARGIN + 14.0 * (i as f64 + 1.0);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{ly}" fill="{color}">{}</text>"#,
            WIDTH - MARGIN + 5.0,
            escape(s.name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Colour map of `(x, y, value)` cells on a regular grid.
pub fn heat_map(title: &str, xlabel: &str, ylabel: &str, cells: &[(f64, f64, f64)]) -> String {
    let x = bounds(cells.iter().map(|c| c.0));
    let y = bounds(cells.iter().map(|c| c.1));
    let v = bounds(cells.iter().map(|c| c.2));
    let nx = distinct(cells.iter().map(|c| c.0)).max(1) as f64;
    let ny = distinct(cells.iter().map(|c| c.1)).max(1) as f64;
    let (w, h) = ((WIDTH - 2.0 * MARGIN) / nx, (HEIGHT - 2.0 * MARGIN) / ny);
    let mut svg = String::new();
    frame(&mut svg, title, xlabel, ylabel, x, y);
    for &(cx, cy, cv) in cells {
        let px = MARGIN + (cx - x.0) / (x.1 - x.0) * (WIDTH - 2.0 * MARGIN - w);
        let py = HEIGHT - MARGIN - h - (cy - y.0) / (y.1 - y.0) * (HEIGHT - 2.0 * MARGIN - h);
        let t = ((cv - v.0) / (v.1 - v.0)).clamp(0.0, 1.0);
        let (r, g, b) = (
            (255.0 * t) as u8,
            (80.0 + 100.0 * (1.0 - (2.0 * t - 1.0).abs())) as u8,
            (255.0 * (1.0 - t)) as u8,
        );
        let _ = writeln!(
            svg,
            r#"<rect x="{px:.2}" y="{py:.2}" width="{:.2}" height="{:.2}" fill="rgb({r},{g},{b})"/>"#,
            w + 0.5,
            h + 0.5
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="40" text-anchor="end">range {:.4} .. {:.4}</text>"#,
        WIDTH - MARGIN,
        v.0,
        v.1
    );
    svg.push_str("</svg>\n");
    svg
}

fn distinct(values: impl Iterator<Item = f64>) -> usize {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    v.len()
}
