//! SVG line charts of success rate from eval or sweep CSVs.

use std::fmt::Write;

use caselab::eval::{parse_eval_csv, EvalRow, EVAL_HEADER, SWEEP_HEADER};

/// Mean and sample std of success over seeds at one x position.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub x: f64,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<Point>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub x_label: String,
    pub series: Vec<Series>,
}

fn aggregate(rows: &[(f64, EvalRow)], x_label: &str) -> Chart {
    let mut labels: Vec<String> = Vec::new();
    for (_, r) in rows {
        let l = r.variant.to_string();
        if !labels.contains(&l) {
            labels.push(l);
        }
    }
    let series = labels
        .into_iter()
        .map(|label| {
            let mine: Vec<&(f64, EvalRow)> = rows.iter().filter(|(_, r)| r.variant.to_string() == label).collect();
            let mut xs: Vec<f64> = mine.iter().map(|(x, _)| *x).collect();
            xs.sort_by(f64::total_cmp);
            xs.dedup();
            let points = xs
                .into_iter()
                .map(|x| {
                    let v: Vec<f64> = mine.iter().filter(|(px, _)| *px == x).map(|(_, r)| r.summary.rate).collect();
                    let n = v.len() as f64;
                    let mean = v.iter().sum::<f64>() / n;
                    let std = if v.len() > 1 {
                        (v.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
                    } else {
                        0.0
                    };
                    Point { x, mean, std }
                })
                .collect();
            Series { label, points }
        })
        .collect();
    Chart {
        x_label: x_label.to_string(),
        series,
    }
}

/// Reads an eval CSV (x = k) or a sequence-length sweep CSV (x = length).
/// Errors name the 1-based line.
pub fn parse_chart(text: &str) -> Result<Chart, String> {
    let header = text.lines().next().unwrap_or("").trim();
    if header == EVAL_HEADER {
        let rows = parse_eval_csv(text)?;
        return Ok(aggregate(&rows.into_iter().map(|r| (r.k as f64, r)).collect::<Vec<_>>(), "k"));
    }
    if header != SWEEP_HEADER {
        return Err(format!("line 1: expected header {EVAL_HEADER:?} or {SWEEP_HEADER:?}"));
    }
    // Strip the length column and reuse the eval parser; line numbers line up.
    let mut stripped = format!("{EVAL_HEADER}\n");
    let mut lengths = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            stripped.push('\n');
            continue;
        }
        let (len, rest) = line
            .split_once(',')
            .ok_or_else(|| format!("line {}: expected 8 fields", i + 1))?;
        lengths.push(len.trim().parse::<usize>().map_err(|_| format!("line {}: bad length", i + 1))?);
        stripped.push_str(rest);
        stripped.push('\n');
    }
    let rows = parse_eval_csv(&stripped)?;
    let rows: Vec<(f64, EvalRow)> = lengths.into_iter().map(|l| l as f64).zip(rows).collect();
    Ok(aggregate(&rows, "sequence length"))
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Success (0..1) against x with ±1 std error bars, one line per variant.
pub fn render_svg(chart: &Chart) -> String {
    let xs: Vec<f64> = chart.series.iter().flat_map(|s| s.points.iter().map(|p| p.x)).collect();
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if xs.is_empty() {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 1.0, hi + 1.0)
    } else {
        (lo, hi)
    };
    let px = |x: f64| LEFT + (x - lo) / (hi - lo) * (W - LEFT - RIGHT);
    let py = |y: f64| TOP + (1.0 - y.clamp(0.0, 1.0)) * (H - TOP - BOTTOM);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let (x0, x1, y0, y1) = (px(lo), px(hi), py(0.0), py(1.0));
    let _ = writeln!(s, r#"<path d="M{x0:.2} {y1:.2}V{y0:.2}H{x1:.2}" fill="none" stroke="black"/>"#);
    for i in 0..=5 {
        let v = i as f64 / 5.0;
        let y = py(v);
        let _ = writeln!(s, r##"<line x1="{:.2}" y1="{y:.2}" x2="{x1:.2}" y2="{y:.2}" stroke="#ddd"/>"##, x0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.1}</text>"#, x0 - 6.0, y + 4.0);
    }
    let mut ticks = xs.clone();
    ticks.sort_by(f64::total_cmp);
    ticks.dedup();
    for t in &ticks {
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{t}</text>"#, px(*t), y0 + 18.0);
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        H - 10.0,
        chart.x_label
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.2}" text-anchor="middle" transform="rotate(-90 14 {:.2})">success rate</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    );
    for (i, series) in chart.series.iter().enumerate() {
        let c = COLORS[i % COLORS.len()];
        let d: Vec<String> = series
            .points
            .iter()
            .enumerate()
            .map(|(j, p)| format!("{}{:.2} {:.2}", if j == 0 { "M" } else { "L" }, px(p.x), py(p.mean)))
            .collect();
        if series.points.len() > 1 {
            let _ = writeln!(s, r#"<path d="{}" fill="none" stroke="{c}" stroke-width="2"/>"#, d.join(""));
        }
        for p in &series.points {
            let (x, y) = (px(p.x), py(p.mean));
            if p.std > 0.0 {
                let _ = writeln!(
                    s,
                    r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="{c}"/>"#,
                    py(p.mean + p.std),
                    py(p.mean - p.std)
                );
            }
            let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3.5" fill="{c}"/>"#);
        }
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = W - RIGHT + 15.0;
        let _ = writeln!(s, r#"<rect x="{lx:.2}" y="{:.2}" width="12" height="12" fill="{c}"/>"#, ly - 10.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{ly:.2}">{}</text>"#, lx + 18.0, series.label);
    }
    s.push_str("</svg>\n");
    s
}
