use std::cmp::Ordering;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::fmt_sig;
use crate::simplex::SignificanceThresholds;

/// Header of the main report CSV. Pinned; downstream tooling relies on it.
pub const REPORT_HEADER: &str = "q,omega0,variant,iterations,mean_rel_improvement,pct_improved,pct_worse,pct_best,mean_err_upper,mean_err_lower,worst_err_upper,zero_stop_frac,mean_initial_dist";

pub const DETAILS_HEADER: &str = "q,omega0,variant,iterations,samples,baseline_zero_count,excluded_unimprovable,rel_min,rel_p05,rel_p25,rel_p50,rel_p75,rel_p95,rel_max,improvement_significant,error_upper_significant,error_change_significant";

const SIG: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RowKey {
    pub q: f64,
    pub omega0: String,
    pub variant: String,
    pub iterations: usize,
}

impl RowKey {
    fn cmp(&self, other: &RowKey) -> Ordering {
        self.q
            .total_cmp(&other.q)
            .then_with(|| self.omega0.cmp(&other.omega0))
            .then_with(|| self.variant.cmp(&other.variant))
            .then_with(|| self.iterations.cmp(&other.iterations))
    }

    fn csv_prefix(&self) -> String {
        format!(
            "{},{},{},{}",
            fmt_sig(self.q, SIG),
            self.omega0,
            self.variant,
            self.iterations
        )
    }
}

/// Aggregates of one cell over all samples. Percentages are in `[0, 100]`,
/// `zero_stop_frac` in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportRow {
    pub key: RowKey,
    pub samples: usize,
    pub mean_rel_improvement: f64,
    pub pct_improved: f64,
    pub pct_worse: f64,
    pub pct_best: f64,
    pub mean_err_upper: f64,
    pub mean_err_lower: f64,
    pub worst_err_upper: f64,
    pub zero_stop_frac: f64,
    pub mean_initial_dist: f64,
    /// Samples left out of the relative improvement because the baseline
    /// distance was zero.
    pub baseline_zero_count: usize,
    pub excluded_unimprovable: usize,
    /// min, 5%, 25%, 50%, 75%, 95%, max of the per-sample relative improvement.
    pub rel_quantiles: [f64; 7],
    /// Mean upper error of this row's baseline cell.
    pub baseline_err_upper: f64,
}

/// One point of the relative-lower-error versus initial-distance scatter.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScatterPoint {
    pub sample_id: usize,
    pub key: RowKey,
    pub initial_dist: f64,
    pub err_lower: f64,
    /// `err_lower / initial_dist`; NaN when the initial distance is zero.
    pub rel_err_lower: f64,
}

/// Per-sample distances behind a row, for distribution plots.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleDistance {
    pub sample_id: usize,
    pub key: RowKey,
    pub distance: f64,
    pub baseline_distance: f64,
    /// NaN when the baseline distance is zero.
    pub rel_improvement: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AggregateReport {
    pub thresholds: SignificanceThresholds,
    pub rows: Vec<ReportRow>,
    pub scatter: Vec<ScatterPoint>,
    pub samples: Vec<SampleDistance>,
}

impl AggregateReport {
    pub fn new(thresholds: SignificanceThresholds) -> Self {
        AggregateReport {
            thresholds,
            rows: Vec::new(),
            scatter: Vec::new(),
            samples: Vec::new(),
        }
    }

    /// Orders rows by `(q, omega0, variant, iterations)`.
    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| a.key.cmp(&b.key));
    }

    pub fn row(
        &self,
        q: f64,
        omega0: &str,
        variant: &str,
        iterations: usize,
    ) -> Option<&ReportRow> {
        self.rows.iter().find(|r| {
            r.key.q == q
                && r.key.omega0 == omega0
                && r.key.variant == variant
                && r.key.iterations == iterations
        })
    }
}

fn f(x: f64) -> String {
    fmt_sig(x, SIG)
}

fn write_file(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    body(&mut out)?;
    out.flush()?;
    Ok(())
}

/// Writes the main CSV: [`REPORT_HEADER`] then one row per cell in key order,
/// decimals at 10 significant digits.
pub fn emit_report(report: &AggregateReport, path: &Path) -> Result<()> {
    write_file(path, |out| write_report(report, out))
}

pub fn write_report<W: Write>(report: &AggregateReport, out: &mut W) -> std::io::Result<()> {
    let mut rows: Vec<&ReportRow> = report.rows.iter().collect();
    rows.sort_by(|a, b| a.key.cmp(&b.key));
    writeln!(out, "{REPORT_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.key.csv_prefix(),
            f(r.mean_rel_improvement),
            f(r.pct_improved),
            f(r.pct_worse),
            f(r.pct_best),
            f(r.mean_err_upper),
            f(r.mean_err_lower),
            f(r.worst_err_upper),
            f(r.zero_stop_frac),
            f(r.mean_initial_dist),
        )?;
    }
    Ok(())
}

/// Quantiles, exclusion counts and significance flags per row.
pub fn emit_details(report: &AggregateReport, path: &Path) -> Result<()> {
    let t = report.thresholds;
    let mut rows: Vec<&ReportRow> = report.rows.iter().collect();
    rows.sort_by(|a, b| a.key.cmp(&b.key));
    write_file(path, |out| {
        writeln!(out, "{DETAILS_HEADER}")?;
        for r in rows {
            let q: Vec<String> = r.rel_quantiles.iter().map(|&x| f(x)).collect();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.key.csv_prefix(),
                r.samples,
                r.baseline_zero_count,
                r.excluded_unimprovable,
                q.join(","),
                r.mean_rel_improvement.abs() > t.improvement_significant,
                r.mean_err_upper > t.error_upper_significant,
                (r.mean_err_upper - r.baseline_err_upper).abs() > t.error_change_significant,
            )?;
        }
        Ok(())
    })
}

pub fn emit_scatter(report: &AggregateReport, path: &Path) -> Result<()> {
    write_file(path, |out| {
        writeln!(
            out,
            "sample_id,q,omega0,variant,iterations,initial_dist,err_lower,rel_err_lower"
        )?;
        for p in &report.scatter {
            writeln!(
                out,
                "{},{},{},{},{}",
                p.sample_id,
                p.key.csv_prefix(),
                f(p.initial_dist),
                f(p.err_lower),
                f(p.rel_err_lower)
            )?;
        }
        Ok(())
    })
}

pub fn emit_samples(report: &AggregateReport, path: &Path) -> Result<()> {
    write_file(path, |out| {
        writeln!(
            out,
            "sample_id,q,omega0,variant,iterations,distance,baseline_distance,rel_improvement"
        )?;
        for s in &report.samples {
            writeln!(
                out,
                "{},{},{},{},{}",
                s.sample_id,
                s.key.csv_prefix(),
                f(s.distance),
                f(s.baseline_distance),
                f(s.rel_improvement)
            )?;
        }
        Ok(())
    })
}

/// Linear-interpolation quantiles (min, 5%, 25%, 50%, 75%, 95%, max) of
/// `values`; all NaN when empty.
pub fn quantiles(values: &[f64]) -> [f64; 7] {
    const LEVELS: [f64; 7] = [0.0, 0.05, 0.25, 0.5, 0.75, 0.95, 1.0];
    if values.is_empty() {
        return [f64::NAN; 7];
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    LEVELS.map(|p| {
        let pos = p * (sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
    })
}
