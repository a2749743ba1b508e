//! Minimal SVG line charts.

use std::fmt::Write as _;

const WIDTH: f64 = 800.0;
const PANEL: f64 = 260.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

pub struct Series<'a> {
    pub label: &'a str,
    pub values: &'a [f64],
}

pub struct Panel<'a> {
    pub title: &'a str,
    pub y_label: &'a str,
    pub series: Vec<Series<'a>>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Stacked panels sharing the time axis.
pub fn render(t: &[f64], panels: &[Panel]) -> String {
    let height = MARGIN + panels.len() as f64 * (PANEL + MARGIN);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (t0, t1) = (t.first().copied().unwrap_or(0.0), t.last().copied().unwrap_or(1.0));
    let t_span = if t1 > t0 { t1 - t0 } else { 1.0 };
    let plot_w = WIDTH - 2.0 * MARGIN;

    for (p, panel) in panels.iter().enumerate() {
        let top = MARGIN + p as f64 * (PANEL + MARGIN);
        let all = panel.series.iter().flat_map(|s| s.values.iter().copied());
        let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        let (lo, hi) = if lo.is_finite() && hi > lo { (lo, hi) } else { (lo.min(0.0) - 1.0, hi.max(0.0) + 1.0) };
        let x_of = |v: f64| MARGIN + (v - t0) / t_span * plot_w;
        let y_of = |v: f64| top + PANEL - (v - lo) / (hi - lo) * PANEL;

        let _ = writeln!(
            s,
            r#"<rect x="{MARGIN}" y="{top}" width="{plot_w}" height="{PANEL}" fill="none" stroke="black"/>"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">{}</text>"#,
            WIDTH / 2.0,
            top - 10.0,
            escape(panel.title)
        );
        let _ = writeln!(
            s,
            r#"<text x="15" y="{}" font-size="12" transform="rotate(-90 15 {})" text-anchor="middle">{}</text>"#,
            top + PANEL / 2.0,
            top + PANEL / 2.0,
            escape(panel.y_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">time [s]</text>"#,
            WIDTH / 2.0,
            top + PANEL + 35.0
        );
        for (v, anchor, x) in [(t0, "start", MARGIN), (t1, "end", MARGIN + plot_w)] {
            let _ = writeln!(
                s,
                r#"<text x="{x}" y="{}" text-anchor="{anchor}" font-size="11">{v:.3}</text>"#,
                top + PANEL + 15.0
            );
        }
        for (v, y) in [(hi, top + 4.0), (lo, top + PANEL)] {
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{y}" text-anchor="end" font-size="11">{v:.3e}</text>"#,
                MARGIN - 4.0
            );
        }
        for (i, series) in panel.series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let mut points = String::with_capacity(series.values.len() * 16);
            for (tk, v) in t.iter().zip(series.values) {
                let _ = write!(points, "{:.2},{:.2} ", x_of(*tk), y_of(*v));
            }
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" data-label="{}" points="{}"/>"#,
                escape(series.label),
                points.trim_end()
            );
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" font-size="11" fill="{color}">{}</text>"#,
                MARGIN + 8.0 + 120.0 * i as f64,
                top + 14.0,
                escape(series.label)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Reads back the polylines of a chart written by [`render`] as
/// `(label, points)` pairs.
pub fn parse_polylines(svg: &str) -> Result<Vec<(String, Vec<(f64, f64)>)>, String> {
    if !svg.trim_start().starts_with("<svg") || !svg.trim_end().ends_with("</svg>") {
        return Err("not an svg document".into());
    }
    let attr = |tag: &str, name: &str| -> Option<String> {
        let key = format!("{name}=\"");
        let start = tag.find(&key)? + key.len();
        let end = tag[start..].find('"')? + start;
        Some(tag[start..end].to_string())
    };
    let mut out = Vec::new();
    for chunk in svg.split("<polyline").skip(1) {
        let tag = &chunk[..chunk.find("/>").ok_or("unterminated polyline")?];
        let label = attr(tag, "data-label").unwrap_or_default();
        let pts = attr(tag, "points").ok_or("polyline without points")?;
        let points = pts
            .split_whitespace()
            .map(|p| {
                let (x, y) = p.split_once(',').ok_or_else(|| format!("bad point {p}"))?;
                Ok((
                    x.parse::<f64>().map_err(|e| e.to_string())?,
                    y.parse::<f64>().map_err(|e| e.to_string())?,
                ))
            })
            .collect::<Result<Vec<_>, String>>()?;
        out.push((label, points));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polylines_round_trip() {
        let t = [0.0, 0.5, 1.0];
        let a = [0.0, 1.0, -1.0];
        let b = [0.0, 0.0, 0.0];
        let svg = render(
            &t,
            &[Panel {
                title: "x3 & estimate",
                y_label: "m",
                series: vec![Series { label: "true", values: &a }, Series { label: "est", values: &b }],
            }],
        );
        let lines = parse_polylines(&svg).unwrap();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0].0, "true");
        assert_eq!(lines[1].1.len(), 3);
        assert!(svg.contains("x3 &amp; estimate"));
    }
}
