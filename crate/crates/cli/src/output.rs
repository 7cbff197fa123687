//! Trace CSV and SVG plot writers.

use std::fmt::Write as _;
use std::io::{self, Write};

use torque_track::Trace;

/// Column names: `t`, then per-joint groups, then `energy`.
pub fn csv_header(n: usize) -> String {
    let mut cols = vec!["t".to_string()];
    for prefix in ["q", "qdot", "qd", "qddotd", "eps", "u", "u_raw"] {
        cols.extend((1..=n).map(|j| format!("{prefix}{j}")));
    }
    cols.push("energy".into());
    cols.join(",")
}

/// 17 significant digits, enough to round-trip any `f64`.
fn num(out: &mut String, x: f64) {
    let _ = write!(out, "{x:.16e}");
}

pub fn write_csv<W: Write>(trace: &Trace, w: W) -> io::Result<()> {
    let mut w = io::BufWriter::new(w);
    writeln!(w, "{}", csv_header(trace.n()))?;
    let mut line = String::with_capacity(64 * (3 + 7 * trace.n()));
    for r in trace.rows() {
        line.clear();
        num(&mut line, r.t);
        for group in [&r.q, &r.qdot, &r.q_d, &r.qdd_d, &r.eps, &r.u, &r.u_raw] {
            for x in group.iter() {
                line.push(',');
                num(&mut line, *x);
            }
        }
        line.push(',');
        num(&mut line, r.energy);
        writeln!(w, "{line}")?;
    }
    w.flush()
}

const WIDTH: f64 = 800.0;
const PANEL: f64 = 260.0;
const MARGIN: f64 = 60.0;
const MAX_POINTS: usize = 2000;
const COLOURS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

fn polyline(
    svg: &mut String,
    trace: &Trace,
    top: f64,
    (lo, hi): (f64, f64),
    value: impl Fn(&torque_track::TraceRow) -> f64,
    colour: &str,
) {
    let rows = trace.rows();
    let stride = rows.len().div_ceil(MAX_POINTS).max(1);
    let (t0, t1) = (rows[0].t, rows[rows.len() - 1].t);
    let span_t = if t1 > t0 { t1 - t0 } else { 1.0 };
    let span_v = if hi > lo { hi - lo } else { 1.0 };
    let _ = write!(
        svg,
        r#"<polyline fill="none" stroke="{colour}" stroke-width="1.2" points=""#
    );
    let mut pts = rows.iter().step_by(stride).collect::<Vec<_>>();
    if rows.len() > 1 && !(rows.len() - 1).is_multiple_of(stride) {
        pts.push(&rows[rows.len() - 1]);
    }
    for r in pts {
        let x = MARGIN + (r.t - t0) / span_t * (WIDTH - 2.0 * MARGIN);
        let y = top + PANEL - (value(r) - lo) / span_v * PANEL;
        let _ = write!(svg, "{x:.2},{y:.2} ");
    }
    svg.push_str("\"/>\n");
}

fn panel(
    svg: &mut String,
    trace: &Trace,
    top: f64,
    title: &str,
    value: impl Fn(&torque_track::TraceRow, usize) -> f64,
) {
    let n = trace.n();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for r in trace.rows() {
        for j in 0..n {
            let v = value(r, j);
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    let pad = 0.05 * (hi - lo).max(1e-12);
    let (lo, hi) = (lo - pad, hi + pad);
    let _ = writeln!(
        svg,
        r##"<rect x="{MARGIN}" y="{top}" width="{w}" height="{PANEL}" fill="none" stroke="#888"/>"##,
        w = WIDTH - 2.0 * MARGIN
    );
    let _ = writeln!(
        svg,
        r#"<text x="{MARGIN}" y="{y}" font-size="13">{title}</text>"#,
        y = top - 8.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="4" y="{y}" font-size="10">{hi:.3e}</text>"#,
        y = top + 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="4" y="{y}" font-size="10">{lo:.3e}</text>"#,
        y = top + PANEL
    );
    if lo < 0.0 && hi > 0.0 {
        let y = top + PANEL - (-lo) / (hi - lo) * PANEL;
        let _ = writeln!(
            svg,
            r##"<line x1="{MARGIN}" y1="{y:.2}" x2="{x2}" y2="{y:.2}" stroke="#ccc"/>"##,
            x2 = WIDTH - MARGIN
        );
    }
    for j in 0..n {
        polyline(
            svg,
            trace,
            top,
            (lo, hi),
            |r| value(r, j),
            COLOURS[j % COLOURS.len()],
        );
    }
}

/// Two stacked panels: tracking error and applied torque against time.
pub fn render_svg(trace: &Trace) -> String {
    let height = 2.0 * PANEL + 3.0 * MARGIN;
    let mut svg = format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" font-family="sans-serif">"#
    );
    svg.push('\n');
    if trace.is_empty() {
        svg.push_str("</svg>\n");
        return svg;
    }
    panel(&mut svg, trace, MARGIN, "tracking error [rad]", |r, j| {
        r.eps[j]
    });
    panel(
        &mut svg,
        trace,
        2.0 * MARGIN + PANEL,
        "applied torque [N m]",
        |r, j| r.u[j],
    );
    let rows = trace.rows();
    let _ = writeln!(
        svg,
        r#"<text x="{MARGIN}" y="{y}" font-size="10">t = {:.3} s</text>"#,
        rows[0].t,
        y = height - 20.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{x}" y="{y}" font-size="10" text-anchor="end">t = {:.3} s</text>"#,
        rows[rows.len() - 1].t,
        x = WIDTH - MARGIN,
        y = height - 20.0
    );
    for j in 0..trace.n() {
        let _ = writeln!(
            svg,
            r#"<text x="{x}" y="{y}" font-size="11" fill="{c}">joint {}</text>"#,
            j + 1,
            x = WIDTH - MARGIN - 60.0 * (trace.n() - j) as f64,
            y = MARGIN - 8.0,
            c = COLOURS[j % COLOURS.len()]
        );
    }
    svg.push_str("</svg>\n");
    svg
}
