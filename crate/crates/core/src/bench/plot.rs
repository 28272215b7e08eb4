use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::run::AggregateRow;
use crate::error::Result;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn span(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

/// Renders the error-vs-dimension chart, one polyline per method. Rows with
/// no finite mean are skipped.
pub fn render_svg(aggregate: &[AggregateRow]) -> String {
    let pts: Vec<&AggregateRow> = aggregate.iter().filter(|r| r.mean_sq_error.is_finite()).collect();
    let mut methods: Vec<&str> = Vec::new();
    for r in &pts {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    let (x0, x1) = span(
        pts.iter().map(|r| r.d as f64).fold(f64::INFINITY, f64::min),
        pts.iter().map(|r| r.d as f64).fold(f64::NEG_INFINITY, f64::max),
    );
    let (y0, y1) = span(0.0, pts.iter().map(|r| r.mean_sq_error).fold(0.0, f64::max) * 1.05);
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{LEFT} {TOP} V{} H{}" fill="none" stroke="black"/>"#,
        TOP + ph,
        LEFT + pw
    );
    for i in 0..=4 {
        let y = y0 + (y1 - y0) * i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            sy(y) + 4.0,
            format_tick(y)
        );
    }
    let mut dims: Vec<usize> = pts.iter().map(|r| r.d).collect();
    dims.sort_unstable();
    dims.dedup();
    for d in dims {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{d}</text>"#,
            sx(d as f64),
            TOP + ph + 16.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{}" text-anchor="middle">dimension d</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">mean ‖θ̂ − θ‖²</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );
    for (i, m) in methods.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut line: Vec<&&AggregateRow> = pts.iter().filter(|r| r.method == *m).collect();
        line.sort_by_key(|r| r.d);
        let coords: Vec<String> = line
            .iter()
            .map(|r| format!("{:.2},{:.2}", sx(r.d as f64), sy(r.mean_sq_error)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            coords.join(" ")
        );
        for r in &line {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                sx(r.d as f64),
                sy(r.mean_sq_error)
            );
        }
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = LEFT + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            lx + 18.0
        );
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 24.0, ly + 4.0, escape(m));
    }
    s.push_str("</svg>\n");
    s
}

fn format_tick(v: f64) -> String {
    if v.abs() >= 100.0 || v == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

/// Writes the chart to `path`. Returns `false` (and writes nothing) when no
/// row has a finite mean.
pub fn emit_plot(aggregate: &[AggregateRow], path: impl AsRef<Path>) -> Result<bool> {
    if !aggregate.iter().any(|r| r.mean_sq_error.is_finite()) {
        eprintln!("warning: nothing to plot");
        return Ok(false);
    }
    fs::write(path, render_svg(aggregate))?;
    Ok(true)
}
