//! Minimal hand-written SVG line and scatter plots.

use std::collections::BTreeMap;
use std::fmt::Write;

use super::report::AggregateReport;
use super::spec::ExperimentKind;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 56.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// A named set of points.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn fit(series: &[Series]) -> Frame {
        let pts = || {
            series
                .iter()
                .flat_map(|s| s.points.iter())
                .filter(|(x, y)| x.is_finite() && y.is_finite())
        };
        let span = |lo: f64, hi: f64| {
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo < 1e-12 {
                (lo - 0.5, hi + 0.5)
            } else {
                (lo, hi)
            }
        };
        let (x0, x1) = pts().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
            (a.min(p.0), b.max(p.0))
        });
        let (y0, y1) = pts().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
            (a.min(p.1), b.max(p.1))
        });
        Frame {
            x: span(x0, x1),
            y: span(y0, y1),
        }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn frame_svg(
    frame: &Frame,
    series: &[Series],
    title: &str,
    xlabel: &str,
    ylabel: &str,
    body: &str,
) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        s,
        r#"<path d="M{l},{t} L{l},{b} L{r},{b}" fill="none" stroke="black"/>"#
    );
    for (v, anchor) in [(frame.x.0, "start"), (frame.x.1, "end")] {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="{anchor}">{v:.4}</text>"#,
            frame.px(v),
            b + 14.0
        );
    }
    for v in [frame.y.0, frame.y.1] {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{v:.4}</text>"#,
            l - 4.0,
            frame.py(v) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="13">{}</text>"#,
        WIDTH / 2.0,
        t - 24.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0,
        escape(xlabel)
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.1}" text-anchor="middle" transform="rotate(-90 14 {:.1})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(ylabel)
    );
    s.push_str(body);
    for (i, series) in series.iter().enumerate() {
        let y = t + 4.0 + 14.0 * i as f64;
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            s,
            r#"<rect x="{:.1}" y="{:.1}" width="10" height="10" fill="{color}"/>"#,
            r - 150.0,
            y - 9.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{y:.1}">{}</text>"#,
            r - 136.0,
            escape(&series.name)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// One polyline per series.
pub fn line_plot(series: &[Series], title: &str, xlabel: &str, ylabel: &str) -> String {
    let frame = Frame::fit(series);
    let mut body = String::new();
    for (i, s) in series.iter().enumerate() {
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y)))
            .collect();
        let _ = writeln!(
            body,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
            pts.join(" "),
            PALETTE[i % PALETTE.len()]
        );
    }
    frame_svg(&frame, series, title, xlabel, ylabel, &body)
}

/// One small dot per point, colored by series.
pub fn scatter_plot(series: &[Series], title: &str, xlabel: &str, ylabel: &str) -> String {
    let frame = Frame::fit(series);
    let mut body = String::new();
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        for &(x, y) in s
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
        {
            let _ = writeln!(
                body,
                r#"<circle cx="{:.2}" cy="{:.2}" r="1.6" fill="{color}" fill-opacity="0.6"/>"#,
                frame.px(x),
                frame.py(y)
            );
        }
    }
    frame_svg(&frame, series, title, xlabel, ylabel, &body)
}

fn series_name(q: f64, omega0: &str, variant: &str) -> String {
    format!("q={q} {omega0} {variant}")
}

/// The natural plot of a report: zero-stop curves, the starting-point
/// scatter, or mean relative improvement against `q`.
pub(crate) fn report_plot(kind: ExperimentKind, report: &AggregateReport) -> Option<String> {
    let mut groups: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    let (title, xlabel, ylabel) = match kind {
        ExperimentKind::ZeroStop => {
            for r in &report.rows {
                let name = series_name(r.key.q, &r.key.omega0, &r.key.variant);
                groups
                    .entry(name)
                    .or_default()
                    .push((r.key.iterations as f64, r.zero_stop_frac));
            }
            (
                "Cumulative zero-power stops",
                "iterations",
                "fraction of samples",
            )
        }
        ExperimentKind::Omega0 => {
            for p in &report.scatter {
                let name = series_name(p.key.q, &p.key.omega0, &p.key.variant);
                groups
                    .entry(name)
                    .or_default()
                    .push((p.initial_dist, p.rel_err_lower));
            }
            let series = to_series(groups);
            return (!series.is_empty()).then(|| {
                scatter_plot(
                    &series,
                    "Relative lower error by initial distance",
                    "initial distance",
                    "lower error / initial distance",
                )
            });
        }
        ExperimentKind::QSweep => {
            let k = report.rows.iter().map(|r| r.key.iterations).max()?;
            for r in report.rows.iter().filter(|r| r.key.iterations == k) {
                let name = format!("{} {}", r.key.omega0, r.key.variant);
                groups
                    .entry(name)
                    .or_default()
                    .push((r.key.q, r.mean_rel_improvement));
            }
            (
                "Mean relative improvement over q = 0.5",
                "q",
                "mean relative improvement",
            )
        }
        ExperimentKind::Showdown => return None,
    };
    let series = to_series(groups);
    (!series.is_empty()).then(|| line_plot(&series, title, xlabel, ylabel))
}

fn to_series(groups: BTreeMap<String, Vec<(f64, f64)>>) -> Vec<Series> {
    groups
        .into_iter()
        .map(|(name, points)| Series { name, points })
        .collect()
}
