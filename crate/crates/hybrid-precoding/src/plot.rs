//! Minimal static SVG line plots, no display dependencies.

use std::fmt::Write as _;

/// One labeled polyline.
#[derive(Debug, Clone)]
pub struct Curve {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const PALETTE: &[&str] = &[
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
    "#bcbd22", "#7f7f7f",
];

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 180.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 56.0;

fn nice_ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    if !(hi - lo).is_finite() || hi <= lo {
        return vec![lo];
    }
    let raw_step = (hi - lo) / target as f64;
    let mag = 10f64.powf(raw_step.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw_step)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() * step;
    let mut ticks = Vec::new();
    let mut t = first;
    while t <= hi + step * 1e-9 {
        // Clean up float dust so labels print tidily.
        let rounded = (t / step).round() * step;
        ticks.push(if rounded.abs() < step * 1e-9 { 0.0 } else { rounded });
        t += step;
    }
    ticks
}

fn fmt_num(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e6 {
        format!("{}", v as i64)
    } else {
        format!("{v:.3}")
    }
}

/// Render curves into a standalone SVG document.
pub fn render_svg(title: &str, x_label: &str, y_label: &str, curves: &[Curve]) -> String {
    let points: Vec<(f64, f64)> = curves.iter().flat_map(|c| c.points.iter().copied()).collect();
    let (x_lo, x_hi) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.0), hi.max(p.0))
        });
    let (y_lo, y_hi) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.1), hi.max(p.1))
        });
    let (x_lo, x_hi) = if points.is_empty() { (0.0, 1.0) } else { (x_lo, x_hi) };
    let (y_lo, y_hi) = if points.is_empty() { (0.0, 1.0) } else { (y_lo, y_hi) };
    let x_span = (x_hi - x_lo).max(1e-12);
    let y_pad = 0.05 * (y_hi - y_lo).max(1e-12);
    let (y_lo, y_hi) = (y_lo - y_pad, y_hi + y_pad);
    let y_span = y_hi - y_lo;

    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let x_px = |x: f64| MARGIN_L + (x - x_lo) / x_span * plot_w;
    let y_px = |y: f64| MARGIN_T + plot_h - (y - y_lo) / y_span * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{title}</text>"#,
        MARGIN_L + plot_w / 2.0
    );

    for t in nice_ticks(x_lo, x_hi, 8) {
        let px = x_px(t);
        let _ = writeln!(
            s,
            r##"<line x1="{px:.1}" y1="{}" x2="{px:.1}" y2="{}" stroke="#dddddd"/>"##,
            MARGIN_T,
            MARGIN_T + plot_h
        );
        let _ = writeln!(
            s,
            r#"<text x="{px:.1}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#,
            MARGIN_T + plot_h + 18.0,
            fmt_num(t)
        );
    }
    for t in nice_ticks(y_lo, y_hi, 8) {
        let py = y_px(t);
        let _ = writeln!(
            s,
            r##"<line x1="{}" y1="{py:.1}" x2="{}" y2="{py:.1}" stroke="#dddddd"/>"##,
            MARGIN_L,
            MARGIN_L + plot_w
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{py:.1}" font-family="sans-serif" font-size="12" text-anchor="end" dominant-baseline="middle">{}</text>"#,
            MARGIN_L - 8.0,
            fmt_num(t)
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle">{x_label}</text>"#,
        MARGIN_L + plot_w / 2.0,
        HEIGHT - 14.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 18 {})">{y_label}</text>"#,
        MARGIN_T + plot_h / 2.0,
        MARGIN_T + plot_h / 2.0
    );

    for (i, curve) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords = curve
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", x_px(x), y_px(y)))
            .collect::<Vec<_>>()
            .join(" ");
        let _ = writeln!(
            s,
            r#"<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="2"/>"#
        );
        for &(x, y) in &curve.points {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                x_px(x),
                y_px(y)
            );
        }
        let ly = MARGIN_T + 16.0 + i as f64 * 18.0;
        let lx = MARGIN_L + plot_w + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            lx + 22.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" dominant-baseline="middle">{}</text>"#,
            lx + 28.0,
            ly,
            curve.label
        );
    }
    let _ = writeln!(s, "</svg>");
    s
}
