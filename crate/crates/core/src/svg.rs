//! Minimal SVG charts: box plots, bar charts and grid heatmaps.
//!
//! Output depends only on the input values, so identical data gives
//! byte-identical files.

use std::fmt::Write as _;

use crate::error::Result;
use crate::stats::percentile_nearest_rank;

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

/// Box geometry from nearest-rank statistics; whiskers at 1.5 IQR clipped to
/// the data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxStats {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub lo: f64,
    pub hi: f64,
}

impl BoxStats {
    pub fn of(v: &[f64]) -> Result<BoxStats> {
        let q1 = percentile_nearest_rank(v, 25.0)?;
        let q3 = percentile_nearest_rank(v, 75.0)?;
        let median = percentile_nearest_rank(v, 50.0)?;
        let iqr = q3 - q1;
        let lo = v
            .iter()
            .copied()
            .filter(|&x| x >= q1 - 1.5 * iqr)
            .fold(f64::INFINITY, f64::min);
        let hi = v
            .iter()
            .copied()
            .filter(|&x| x <= q3 + 1.5 * iqr)
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(BoxStats {
            median,
            q1,
            q3,
            lo,
            hi,
        })
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn header(title: &str, ylabel: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        W / 2.0,
        esc(title)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" transform="rotate(-90 16 {})" text-anchor="middle">{}</text>"#,
        H / 2.0,
        H / 2.0,
        esc(ylabel)
    );
    s
}

/// Y axis from 0 (or the data minimum if negative) to a rounded maximum.
fn axis(s: &mut String, lo: f64, hi: f64) -> impl Fn(f64) -> f64 {
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo, lo + 1.0) };
    let plot_h = H - TOP - BOTTOM;
    let y = move |v: f64| TOP + plot_h * (1.0 - (v - lo) / (hi - lo));
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{}" stroke="black"/>"#,
        H - BOTTOM
    );
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        H - BOTTOM,
        W - RIGHT,
        H - BOTTOM
    );
    for i in 0..=5 {
        let v = lo + (hi - lo) * i as f64 / 5.0;
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{:.2}" x2="{LEFT}" y2="{:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 4.0,
            y(v),
            y(v),
            LEFT - 6.0,
            y(v) + 4.0,
            fmt_tick(v)
        );
    }
    y
}

fn fmt_tick(v: f64) -> String {
    if (v - v.round()).abs() < 1e-9 {
        format!("{}", v.round() as i64)
    } else {
        format!("{v:.2}")
    }
}

fn nice_max(v: f64) -> f64 {
    if v <= 0.0 {
        return 1.0;
    }
    let mag = 10f64.powf(v.log10().floor());
    for m in [1.0, 2.0, 2.5, 5.0, 10.0] {
        if m * mag >= v {
            return m * mag;
        }
    }
    10.0 * mag
}

fn slot(i: usize, n: usize) -> (f64, f64) {
    let w = (W - LEFT - RIGHT) / n as f64;
    (LEFT + w * (i as f64 + 0.5), w)
}

fn label(s: &mut String, x: f64, text: &str) {
    let _ = writeln!(
        s,
        r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#,
        H - BOTTOM + 18.0,
        esc(text)
    );
}

/// One box per group.
pub fn box_plot(groups: &[(String, Vec<f64>)], title: &str, ylabel: &str) -> Result<String> {
    let stats = groups
        .iter()
        .map(|(_, v)| BoxStats::of(v))
        .collect::<Result<Vec<_>>>()?;
    let hi = nice_max(stats.iter().map(|b| b.hi).fold(0.0, f64::max));
    let mut s = header(title, ylabel);
    let y = axis(&mut s, 0.0, hi);
    for (i, ((name, _), b)) in groups.iter().zip(&stats).enumerate() {
        let (cx, w) = slot(i, groups.len());
        let bw = (w * 0.5).min(60.0);
        let _ = writeln!(
            s,
            r#"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="black"/>"#,
            y(b.hi),
            y(b.q3)
        );
        let _ = writeln!(
            s,
            r#"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="black"/>"#,
            y(b.q1),
            y(b.lo)
        );
        for v in [b.lo, b.hi] {
            let _ = writeln!(
                s,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black"/>"#,
                cx - bw / 4.0,
                y(v),
                cx + bw / 4.0,
                y(v)
            );
        }
        let _ = writeln!(
            s,
            r##"<rect x="{:.2}" y="{:.2}" width="{bw:.2}" height="{:.2}" fill="#9ecae1" stroke="black"/>"##,
            cx - bw / 2.0,
            y(b.q3),
            (y(b.q1) - y(b.q3)).max(0.0)
        );
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black" stroke-width="2"/>"#,
            cx - bw / 2.0,
            y(b.median),
            cx + bw / 2.0,
            y(b.median)
        );
        label(&mut s, cx, name);
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// One bar per group.
pub fn bar_chart(bars: &[(String, f64)], title: &str, ylabel: &str) -> String {
    let hi = nice_max(bars.iter().map(|b| b.1).fold(0.0, f64::max));
    let mut s = header(title, ylabel);
    let y = axis(&mut s, 0.0, hi);
    for (i, (name, v)) in bars.iter().enumerate() {
        let (cx, w) = slot(i, bars.len());
        let bw = (w * 0.6).min(70.0);
        let _ = writeln!(
            s,
            r##"<rect x="{:.2}" y="{:.2}" width="{bw:.2}" height="{:.2}" fill="#fdae6b" stroke="black"/>"##,
            cx - bw / 2.0,
            y(*v),
            y(0.0) - y(*v)
        );
        let _ = writeln!(
            s,
            r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            y(*v) - 4.0,
            fmt_tick(*v)
        );
        label(&mut s, cx, name);
    }
    s.push_str("</svg>\n");
    s
}

/// Row-major grid of optional values, row 0 at the bottom; empty cells stay
/// white, filled cells shade from light (low) to dark (high).
pub fn heatmap(cells: &[Option<f64>], cols: usize, title: &str) -> String {
    let rows = if cols == 0 { 0 } else { cells.len() / cols };
    let size = (H - TOP - 20.0).min(W - 40.0);
    let px = if rows.max(cols) == 0 {
        0.0
    } else {
        size / rows.max(cols) as f64
    };
    let (lo, hi) = cells
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        W / 2.0,
        esc(title)
    );
    let x0 = (W - size) / 2.0;
    let _ = writeln!(
        s,
        r#"<rect x="{x0:.2}" y="{TOP}" width="{size:.2}" height="{size:.2}" fill="none" stroke="black"/>"#
    );
    for (i, c) in cells.iter().enumerate() {
        let Some(v) = c else { continue };
        let t = if hi > lo { (v - lo) / (hi - lo) } else { 1.0 };
        let shade = (230.0 - 200.0 * t).round() as u8;
        let (r, cidx) = (i / cols, i % cols);
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{:.2}" width="{px:.2}" height="{px:.2}" fill="rgb({shade},{shade},255)"/>"#,
            x0 + cidx as f64 * px,
            TOP + (rows - 1 - r) as f64 * px
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_stats_use_nearest_rank() {
        let b = BoxStats::of(&[1.0, 2.0, 3.0, 4.0, 100.0]).unwrap();
        assert_eq!((b.q1, b.median, b.q3), (2.0, 3.0, 4.0));
        assert_eq!((b.lo, b.hi), (1.0, 4.0));
        assert!(BoxStats::of(&[]).is_err());
    }

    #[test]
    fn charts_are_deterministic_and_well_formed() {
        let g = vec![
            ("a".to_string(), vec![3.0, 5.0, 9.0]),
            ("b<c".to_string(), vec![2.0]),
        ];
        let s = box_plot(&g, "t", "actions").unwrap();
        assert_eq!(s, box_plot(&g, "t", "actions").unwrap());
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert!(s.contains("b&lt;c"));
        assert_eq!(s.matches("<rect").count(), 1 + 2);
        let b = bar_chart(&[("x".into(), 25.0), ("y".into(), 0.0)], "f", "%");
        assert_eq!(b.matches("<rect").count(), 1 + 2);
        let h = heatmap(&[Some(1.0), None, Some(2.0), None], 2, "p");
        assert_eq!(h.matches("<rect").count(), 2 + 2);
    }
}
