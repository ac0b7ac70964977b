//! Line charts with shaded confidence bands, written as plain SVG text.

use std::fmt::Write;

/// One curve: `(x, mean, lo, hi)` points in x order.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64, f64, f64)>,
}

const W: f64 = 720.0;
const H: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// Roughly `target` round tick values covering `[lo, hi]`.
pub fn nice_ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    if hi.partial_cmp(&lo) != Some(std::cmp::Ordering::Greater) {
        return vec![lo];
    }
    let raw = (hi - lo) / target.max(1) as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn fmt(v: f64) -> String {
    let s = format!("{v:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let finite = |v: f64| v.is_finite();
    let xs = series.iter().flat_map(|s| s.points.iter().map(|p| p.0));
    let ys = series
        .iter()
        .flat_map(|s| s.points.iter().flat_map(|p| [p.1, p.2, p.3]))
        .filter(|v| finite(*v));
    let (x0, x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (mut y0, mut y1) = ys.fold((0.0f64, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (x0, x1) = if x0.is_finite() && x1 > x0 { (x0, x1) } else { (0.0, 1.0) };
    if !y1.is_finite() || y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let yt = nice_ticks(y0, y1 * 1.05, 6);
    y1 = yt.last().copied().filter(|t| *t >= y1).unwrap_or(y1 * 1.05);
    y0 = y0.min(yt.first().copied().unwrap_or(y0));

    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let py = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

    let mut o = String::new();
    let _ = writeln!(
        o,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(o, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        o,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        fmt(LEFT + pw / 2.0),
        escape(title)
    );
    for t in nice_ticks(x0, x1, 8) {
        let x = fmt(px(t));
        let _ = writeln!(
            o,
            r##"<line x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="#e5e5e5"/><text x="{x}" y="{}" text-anchor="middle">{}</text>"##,
            fmt(TOP),
            fmt(TOP + ph),
            fmt(TOP + ph + 16.0),
            fmt(t)
        );
    }
    for t in yt.iter().copied().filter(|t| *t >= y0 && *t <= y1) {
        let y = fmt(py(t));
        let _ = writeln!(
            o,
            r##"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="#e5e5e5"/><text x="{}" y="{y}" dy="4" text-anchor="end">{}</text>"##,
            fmt(LEFT),
            fmt(LEFT + pw),
            fmt(LEFT - 6.0),
            fmt(t)
        );
    }
    let _ = writeln!(
        o,
        r#"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        fmt(LEFT),
        fmt(TOP),
        fmt(pw),
        fmt(ph)
    );
    let _ = writeln!(
        o,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        fmt(LEFT + pw / 2.0),
        fmt(H - 14.0),
        escape(x_label)
    );
    let _ = writeln!(
        o,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
        fmt(TOP + ph / 2.0),
        fmt(TOP + ph / 2.0),
        escape(y_label)
    );

    for (k, s) in series.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        let band: Vec<_> = s
            .points
            .iter()
            .filter(|p| finite(p.2) && finite(p.3))
            .collect();
        if band.len() >= 2 {
            let upper = band.iter().map(|p| format!("{},{}", fmt(px(p.0)), fmt(py(p.3))));
            let lower = band.iter().rev().map(|p| format!("{},{}", fmt(px(p.0)), fmt(py(p.2))));
            let pts: Vec<String> = upper.chain(lower).collect();
            let _ = writeln!(
                o,
                r#"<polygon points="{}" fill="{colour}" fill-opacity="0.2" stroke="none"/>"#,
                pts.join(" ")
            );
        }
        let line: Vec<String> = s
            .points
            .iter()
            .filter(|p| finite(p.1))
            .map(|p| format!("{},{}", fmt(px(p.0)), fmt(py(p.1))))
            .collect();
        if !line.is_empty() {
            let _ = writeln!(
                o,
                r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="2"/>"#,
                line.join(" ")
            );
        }
        let ly = TOP + 10.0 + 20.0 * k as f64;
        let lx = LEFT + pw + 14.0;
        let _ = writeln!(
            o,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{colour}" stroke-width="3"/><text x="{}" y="{}" dy="4">{}</text>"#,
            fmt(lx),
            fmt(ly),
            fmt(lx + 20.0),
            fmt(ly),
            fmt(lx + 26.0),
            fmt(ly),
            escape(&s.label)
        );
    }
    o.push_str("</svg>\n");
    o
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series() -> Vec<Series> {
        vec![
            Series {
                label: "a<b".into(),
                points: vec![(0.0, 1.0, 0.5, 1.5), (50.0, 4.0, 3.0, 5.0), (100.0, 6.0, 5.0, 7.0)],
            },
            Series {
                label: "flat".into(),
                points: vec![(0.0, 2.0, f64::NAN, f64::NAN), (100.0, 2.0, f64::NAN, f64::NAN)],
            },
        ]
    }

    #[test]
    fn ticks_are_round() {
        assert_eq!(nice_ticks(0.0, 3000.0, 6), vec![0.0, 500.0, 1000.0, 1500.0, 2000.0, 2500.0, 3000.0]);
        assert_eq!(nice_ticks(0.0, 9.0, 4), vec![0.0, 2.5, 5.0, 7.5]);
        assert_eq!(nice_ticks(3.0, 3.0, 4), vec![3.0]);
    }

    #[test]
    fn chart_structure() {
        let svg = line_chart("c0", "observations", "count", &series());
        assert!(svg.starts_with("<svg ") && svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        // Degenerate series has no band.
        assert_eq!(svg.matches("<polygon").count(), 1);
        assert!(svg.contains("a&lt;b"));
        assert!(!svg.contains("NaN"));
    }

    #[test]
    fn deterministic_text() {
        assert_eq!(line_chart("t", "x", "y", &series()), line_chart("t", "x", "y", &series()));
        let empty = line_chart("t", "x", "y", &[]);
        assert!(empty.contains("</svg>"));
    }
}
