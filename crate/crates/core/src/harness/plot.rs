//! Minimal SVG line charts of campaign results.

use std::fmt::Write as _;

use super::report::ResultRow;
use crate::turbo::Receiver;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Which column of `results.csv` to plot against `K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    ActivityError,
    NmseDb,
    Bler,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::ActivityError, Metric::NmseDb, Metric::Bler];

    pub fn file_stem(self) -> &'static str {
        match self {
            Metric::ActivityError => "activity_err",
            Metric::NmseDb => "nmse_db",
            Metric::Bler => "bler",
        }
    }

    fn label(self) -> &'static str {
        match self {
            Metric::ActivityError => "activity error probability",
            Metric::NmseDb => "NMSE (dB)",
            Metric::Bler => "BLER",
        }
    }

    fn log_scale(self) -> bool {
        !matches!(self, Metric::NmseDb)
    }

    fn value(self, row: &ResultRow) -> f64 {
        match self {
            Metric::ActivityError => row.activity_err,
            Metric::NmseDb => row.nmse_db,
            Metric::Bler => row.bler,
        }
    }
}

/// Render one metric against `K`, one line per receiver. Zeros are dropped
/// from log-scale charts.
pub fn render_svg(rows: &[ResultRow], metric: Metric) -> String {
    let mut series: Vec<(Receiver, Vec<(f64, f64)>)> = Vec::new();
    for row in rows {
        let v = metric.value(row);
        if !v.is_finite() || (metric.log_scale() && v <= 0.0) {
            continue;
        }
        let y = if metric.log_scale() { v.log10() } else { v };
        match series.iter_mut().find(|(r, _)| *r == row.receiver) {
            Some((_, pts)) => pts.push((row.k as f64, y)),
            None => series.push((row.receiver, vec![(row.k as f64, y)])),
        }
    }
    for (_, pts) in &mut series {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    let all = series.iter().flat_map(|(_, p)| p.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x0 > x1 {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if metric.log_scale() {
        y0 = y0.floor();
        y1 = y1.ceil().max(y0 + 1.0);
    } else if y1 - y0 < 1e-9 {
        y0 -= 1.0;
        y1 += 1.0;
    }
    if x1 - x0 < 1e-9 {
        x0 -= 1.0;
        x1 += 1.0;
    }
    let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * (W - LEFT - RIGHT);
    let py = |y: f64| H - BOTTOM - (y - y0) / (y1 - y0) * (H - TOP - BOTTOM);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{} vs K</text>"#,
        (LEFT + W - RIGHT) / 2.0,
        metric.label()
    );
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - LEFT - RIGHT,
        H - TOP - BOTTOM
    );
    // ticks
    for i in 0..=4 {
        let x = x0 + (x1 - x0) * i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{x:.0}</text>"#,
            px(x),
            H - BOTTOM + 18.0
        );
    }
    let y_ticks: Vec<f64> = if metric.log_scale() {
        (y0 as i64..=y1 as i64).map(|e| e as f64).collect()
    } else {
        (0..=4).map(|i| y0 + (y1 - y0) * i as f64 / 4.0).collect()
    };
    for y in y_ticks {
        let label = if metric.log_scale() {
            format!("1e{y:.0}")
        } else {
            format!("{y:.1}")
        };
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" x2="{:.1}" y1="{:.1}" y2="{:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{label}</text>"##,
            W - RIGHT,
            py(y),
            py(y),
            LEFT - 6.0,
            py(y) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">K (active users)</text>"#,
        (LEFT + W - RIGHT) / 2.0,
        H - 12.0
    );
    for (i, (receiver, pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.1},{:.1}", px(x), py(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            path.join(" ")
        );
        for &(x, y) in pts {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{color}"/>"#,
                px(x),
                py(y)
            );
        }
        let ly = TOP + 16.0 + 18.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" x2="{:.1}" y1="{ly:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{receiver}</text>"#,
            W - RIGHT + 10.0,
            W - RIGHT + 30.0,
            W - RIGHT + 36.0,
            ly + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}
