//! Seeded batch experiments over paired samples.
//!
//! Sample `i` of an experiment is drawn from [`SampleRng::for_sample`]`(seed, i)`
//! and every cell runs on the same samples. Each cell is run once per sample
//! with the largest iteration budget; smaller budgets are read off the trace
//! prefix. Samples are processed in parallel and folded in index order, so
//! output does not depend on scheduling.

mod report;
mod spec;
mod svg;

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use report::{
    emit_details, emit_report, emit_samples, emit_scatter, quantiles, write_report,
    AggregateReport, ReportRow, RowKey, SampleDistance, ScatterPoint, DETAILS_HEADER,
    REPORT_HEADER,
};
pub use spec::{ExperimentKind, ExperimentSpec, VariantSpec, BASELINE_QUOTA};
pub use svg::{line_plot, scatter_plot, Series};

use crate::atlas::{nearest, BanzhafAtlas, Provenance};
use crate::error::{Error, Result};
use crate::rng::SampleRng;
use crate::simplex::{sample_ordered_simplex, SignificanceThresholds};
use crate::solver::{
    run, BudgetOutcome, Omega0Mode, SolverConfig, StopReason, Variant, DEFAULT_MAX_DISTANCE,
};

/// Distances closer than this count as ties.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Label of the synthetic per-sample best-of-variants row.
pub const BEST_OF_LABEL: &str = "best_of";

#[derive(Clone, Debug)]
struct Cell {
    quota: f64,
    omega0: Omega0Mode,
    variant: Variant,
}

#[derive(Default)]
struct CellSet {
    cells: Vec<Cell>,
    index: HashMap<String, usize>,
}

impl CellSet {
    fn add(&mut self, quota: f64, omega0: &Omega0Mode, variant: Variant) -> usize {
        let key = format!("{}|{omega0}|{variant}", quota.to_bits());
        *self.index.entry(key).or_insert_with(|| {
            self.cells.push(Cell {
                quota,
                omega0: omega0.clone(),
                variant,
            });
            self.cells.len() - 1
        })
    }
}

enum Source {
    Cell(usize),
    /// Per-sample minimum over several cells.
    MinOf(Vec<usize>),
}

struct RowPlan {
    key: RowKey,
    source: Source,
    budget: usize,
    baseline: (usize, usize),
    /// Cells competing for "strictly best" at `budget`.
    group: Vec<usize>,
    scatter: bool,
}

struct CellOutcome {
    initial: f64,
    /// One entry per [`Evaluation::budgets`].
    at: Vec<BudgetOutcome>,
}

struct Evaluation {
    budgets: Vec<usize>,
    /// `outcomes[sample][cell]`.
    outcomes: Vec<Vec<CellOutcome>>,
    nearest: Vec<f64>,
    atlas_provenance: Provenance,
    atlas_size: usize,
}

impl Evaluation {
    fn budget_index(&self, k: usize) -> usize {
        self.budgets.binary_search(&k).expect("budget was planned")
    }

    fn outcome(&self, sample: usize, cell: usize, budget: usize) -> &BudgetOutcome {
        &self.outcomes[sample][cell].at[self.budget_index(budget)]
    }

    fn distance(&self, sample: usize, source: &Source, budget: usize) -> f64 {
        match source {
            Source::Cell(c) => self.outcome(sample, *c, budget).best_distance,
            Source::MinOf(cs) => cs
                .iter()
                .map(|&c| self.outcome(sample, c, budget).best_distance)
                .fold(f64::INFINITY, f64::min),
        }
    }

    fn zero_stopped(&self, sample: usize, source: &Source, budget: usize) -> bool {
        let stopped =
            |c: usize| self.outcome(sample, c, budget).stop_reason == StopReason::ZeroPowerStop;
        match source {
            Source::Cell(c) => stopped(*c),
            Source::MinOf(cs) => cs.iter().all(|&c| stopped(c)),
        }
    }

    fn initial(&self, sample: usize, source: &Source) -> f64 {
        match source {
            Source::Cell(c) => self.outcomes[sample][*c].initial,
            Source::MinOf(cs) => cs
                .iter()
                .map(|&c| self.outcomes[sample][c].initial)
                .fold(f64::INFINITY, f64::min),
        }
    }

    fn strictly_best(&self, sample: usize, cell: usize, group: &[usize], budget: usize) -> bool {
        if group.len() < 2 {
            return false;
        }
        let d = self.outcome(sample, cell, budget).best_distance;
        group
            .iter()
            .filter(|&&g| g != cell)
            .all(|&g| d < self.outcome(sample, g, budget).best_distance - TIE_TOLERANCE)
    }
}

fn sorted_budgets(grid: &[usize]) -> Vec<usize> {
    let mut b = grid.to_vec();
    b.sort_unstable();
    b.dedup();
    b
}

fn plan(spec: &ExperimentSpec, kind: ExperimentKind, cells: &mut CellSet) -> Vec<RowPlan> {
    let budgets = sorted_budgets(&spec.iteration_grid);
    let mut rows = Vec::new();
    let key = |q: f64, mode: &Omega0Mode, variant: String, k: usize| RowKey {
        q,
        omega0: mode.to_string(),
        variant,
        iterations: k,
    };
    match kind {
        ExperimentKind::QSweep => {
            for mode in &spec.omega0_modes {
                for v in spec.unpinned_variants() {
                    let group: Vec<usize> = spec
                        .quota_grid
                        .iter()
                        .map(|&q| cells.add(q, mode, v))
                        .collect();
                    let base = cells.add(BASELINE_QUOTA, mode, v);
                    for &k in &budgets {
                        for (&q, &c) in spec.quota_grid.iter().zip(&group) {
                            rows.push(RowPlan {
                                key: key(q, mode, v.to_string(), k),
                                source: Source::Cell(c),
                                budget: k,
                                baseline: (base, k),
                                group: group.clone(),
                                scatter: false,
                            });
                        }
                    }
                }
            }
        }
        ExperimentKind::Omega0 | ExperimentKind::ZeroStop => {
            let baseline_mode = spec
                .omega0_modes
                .iter()
                .position(|m| *m == Omega0Mode::Target)
                .unwrap_or(0);
            let last = *budgets.last().expect("non-empty grid");
            for &q in &spec.quota_grid {
                for vs in &spec.variants {
                    let quota = vs.quota_for(q);
                    let group: Vec<usize> = spec
                        .omega0_modes
                        .iter()
                        .map(|m| cells.add(quota, m, vs.variant))
                        .collect();
                    for &k in &budgets {
                        for (mode, &c) in spec.omega0_modes.iter().zip(&group) {
                            let baseline = if kind == ExperimentKind::Omega0 {
                                (group[baseline_mode], k)
                            } else {
                                (c, (k - 1).max(1))
                            };
                            rows.push(RowPlan {
                                key: key(q, mode, vs.label(), k),
                                source: Source::Cell(c),
                                budget: k,
                                baseline,
                                group: group.clone(),
                                scatter: kind == ExperimentKind::Omega0 && k == last,
                            });
                        }
                    }
                }
            }
        }
        ExperimentKind::Showdown => {
            for &q in &spec.quota_grid {
                for mode in &spec.omega0_modes {
                    let group: Vec<usize> = spec
                        .variants
                        .iter()
                        .map(|vs| cells.add(vs.quota_for(q), mode, vs.variant))
                        .collect();
                    let base = spec
                        .variants
                        .iter()
                        .position(|vs| vs.variant.is_base())
                        .map(|i| group[i])
                        .expect("validated: showdown has a base variant");
                    let improvements: Vec<usize> = spec
                        .variants
                        .iter()
                        .zip(&group)
                        .filter(|(vs, _)| !vs.variant.is_base())
                        .map(|(_, &c)| c)
                        .collect();
                    for &k in &budgets {
                        for (vs, &c) in spec.variants.iter().zip(&group) {
                            rows.push(RowPlan {
                                key: key(q, mode, vs.label(), k),
                                source: Source::Cell(c),
                                budget: k,
                                baseline: (base, k),
                                group: group.clone(),
                                scatter: false,
                            });
                        }
                        // Without improvements the best-of row is the base row.
                        let members = if improvements.is_empty() {
                            vec![base]
                        } else {
                            improvements.clone()
                        };
                        rows.push(RowPlan {
                            key: key(q, mode, BEST_OF_LABEL.into(), k),
                            source: Source::MinOf(members),
                            budget: k,
                            baseline: (base, k),
                            group: group.clone(),
                            scatter: false,
                        });
                    }
                }
            }
        }
    }
    rows
}

/// Every budget the plans read, including the `k - 1` baselines.
fn needed_budgets<'a>(plans: impl Iterator<Item = &'a RowPlan>) -> Vec<usize> {
    let all: Vec<usize> = plans.flat_map(|p| [p.budget, p.baseline.1]).collect();
    sorted_budgets(&all)
}

fn evaluate(
    spec: &ExperimentSpec,
    cells: &[Cell],
    budgets: Vec<usize>,
    atlas: Option<&BanzhafAtlas>,
) -> Result<Evaluation> {
    let n = spec.n;
    let k_max = *budgets.last().expect("at least one budget");
    let max_distance = spec.max_distance.unwrap_or(DEFAULT_MAX_DISTANCE);
    let configs: Vec<SolverConfig> = cells
        .iter()
        .map(|c| {
            SolverConfig::new(c.quota)
                .with_omega0(c.omega0.clone())
                .with_variant(c.variant)
                .with_max_iterations(k_max)
                .with_max_distance(max_distance)
        })
        .collect();
    let collect_traces = atlas.is_none();

    let per_sample = (0..spec.sample_count)
        .into_par_iter()
        .map(|i| {
            let t =
                sample_ordered_simplex(n, &mut SampleRng::for_sample(spec.master_seed, i as u64));
            let mut seen = collect_traces.then(|| BanzhafAtlas::new(n, Provenance::RunTraces));
            let mut outcomes = Vec::with_capacity(configs.len());
            for config in &configs {
                let result = run(&t, config)?;
                if let Some(seen) = seen.as_mut() {
                    for record in &result.trace {
                        seen.insert(&record.power);
                    }
                }
                let summary = result.summary();
                outcomes.push(CellOutcome {
                    initial: summary.initial_distance(),
                    at: budgets.iter().map(|&k| summary.outcome_at(k)).collect(),
                });
            }
            Ok((t, outcomes, seen))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut built = BanzhafAtlas::new(n, Provenance::RunTraces);
    let mut targets = Vec::with_capacity(per_sample.len());
    let mut outcomes = Vec::with_capacity(per_sample.len());
    for (t, o, seen) in per_sample {
        if let Some(seen) = seen {
            for v in seen.vectors() {
                built.insert(v);
            }
        }
        targets.push(t);
        outcomes.push(o);
    }
    let atlas = atlas.unwrap_or(&built);
    let nearest = targets
        .par_iter()
        .map(|t| nearest(atlas, t.values()).map(|(_, d)| d))
        .collect::<Result<Vec<_>>>()?;

    Ok(Evaluation {
        budgets,
        outcomes,
        nearest,
        atlas_provenance: atlas.provenance(),
        atlas_size: atlas.len(),
    })
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

fn aggregate(
    eval: &Evaluation,
    plan: &RowPlan,
    exclude_unimprovable: bool,
    report: &mut AggregateReport,
    dump: bool,
) {
    let samples = eval.outcomes.len();
    let k = plan.budget;
    let (base_cell, base_k) = plan.baseline;
    let mut rel = Vec::with_capacity(samples);
    let (mut improved, mut worse, mut best, mut zero) = (0usize, 0usize, 0usize, 0usize);
    let (mut baseline_zero, mut excluded) = (0usize, 0usize);
    let mut upper = Vec::with_capacity(samples);
    let mut lower = Vec::with_capacity(samples);
    let mut initial = Vec::with_capacity(samples);
    let mut base_upper = Vec::with_capacity(samples);

    for s in 0..samples {
        let d = eval.distance(s, &plan.source, k);
        let db = eval.outcome(s, base_cell, base_k).best_distance;
        let d0 = eval.initial(s, &plan.source);
        let err_lower = (d - eval.nearest[s]).max(0.0);

        if d < db - TIE_TOLERANCE {
            improved += 1;
        } else if d > db + TIE_TOLERANCE {
            worse += 1;
        }
        let is_best = match &plan.source {
            Source::Cell(c) => eval.strictly_best(s, *c, &plan.group, k),
            Source::MinOf(cs) => cs.iter().any(|&c| eval.strictly_best(s, c, &plan.group, k)),
        };
        best += is_best as usize;
        zero += eval.zero_stopped(s, &plan.source, k) as usize;

        let r = if db == 0.0 {
            baseline_zero += 1;
            f64::NAN
        } else if exclude_unimprovable && db >= eval.outcomes[s][base_cell].initial {
            excluded += 1;
            f64::NAN
        } else {
            let r = (db - d) / db;
            rel.push(r);
            r
        };

        upper.push(d);
        lower.push(err_lower);
        initial.push(d0);
        base_upper.push(db);

        if plan.scatter {
            report.scatter.push(ScatterPoint {
                sample_id: s,
                key: plan.key.clone(),
                initial_dist: d0,
                err_lower,
                rel_err_lower: if d0 == 0.0 { f64::NAN } else { err_lower / d0 },
            });
        }
        if dump {
            report.samples.push(SampleDistance {
                sample_id: s,
                key: plan.key.clone(),
                distance: d,
                baseline_distance: db,
                rel_improvement: r,
            });
        }
    }

    let pct = |c: usize| 100.0 * c as f64 / samples as f64;
    report.rows.push(ReportRow {
        key: plan.key.clone(),
        samples,
        mean_rel_improvement: mean(rel.iter().copied()),
        pct_improved: pct(improved),
        pct_worse: pct(worse),
        pct_best: pct(best),
        mean_err_upper: mean(upper.iter().copied()),
        mean_err_lower: mean(lower.iter().copied()),
        worst_err_upper: upper.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        zero_stop_frac: zero as f64 / samples as f64,
        mean_initial_dist: mean(initial.iter().copied()),
        baseline_zero_count: baseline_zero,
        excluded_unimprovable: excluded,
        rel_quantiles: quantiles(&rel),
        baseline_err_upper: mean(base_upper.iter().copied()),
    });
}

/// Loads the spec's atlas file, if any, and checks its dimension.
pub fn load_spec_atlas(spec: &ExperimentSpec) -> Result<Option<BanzhafAtlas>> {
    let Some(path) = &spec.atlas_path else {
        return Ok(None);
    };
    let file = fs::File::open(path)?;
    let atlas = BanzhafAtlas::read_from(std::io::BufReader::new(file))?;
    if atlas.n() != spec.n {
        return Err(Error::InvalidSpec(format!(
            "atlas has n = {}, spec has n = {}",
            atlas.n(),
            spec.n
        )));
    }
    Ok(Some(atlas))
}

/// Reports of one evaluation.
#[derive(Clone, Debug)]
pub struct ExperimentResults {
    pub reports: Vec<(ExperimentKind, AggregateReport)>,
    pub atlas_provenance: Provenance,
    pub atlas_size: usize,
}

impl ExperimentResults {
    pub fn report(&self, kind: ExperimentKind) -> Option<&AggregateReport> {
        self.reports
            .iter()
            .find(|(k, _)| *k == kind)
            .map(|(_, r)| r)
    }
}

/// Runs `kinds` on one shared set of samples. `atlas` bounds the lower error;
/// without it the spec's `atlas_path` is used, and failing that the vectors
/// seen by this experiment's runs.
pub fn run_kinds(
    spec: &ExperimentSpec,
    kinds: &[ExperimentKind],
    atlas: Option<&BanzhafAtlas>,
    dump_samples: bool,
) -> Result<ExperimentResults> {
    spec.validate()?;
    let loaded;
    let atlas = match atlas {
        Some(a) => {
            if a.n() != spec.n {
                return Err(Error::InvalidSpec(format!(
                    "atlas has n = {}, spec has n = {}",
                    a.n(),
                    spec.n
                )));
            }
            if a.is_empty() {
                return Err(Error::EmptyAtlas);
            }
            Some(a)
        }
        None => {
            loaded = load_spec_atlas(spec)?;
            loaded.as_ref()
        }
    };

    let mut cells = CellSet::default();
    let plans: Vec<(ExperimentKind, Vec<RowPlan>)> = kinds
        .iter()
        .map(|&kind| (kind, plan(spec, kind, &mut cells)))
        .collect();
    let budgets = needed_budgets(plans.iter().flat_map(|(_, p)| p.iter()));
    let eval = evaluate(spec, &cells.cells, budgets, atlas)?;

    let thresholds = SignificanceThresholds::for_players(spec.n);
    let reports = plans
        .iter()
        .map(|(kind, rows)| {
            let mut report = AggregateReport::new(thresholds);
            for row in rows {
                aggregate(
                    &eval,
                    row,
                    spec.exclude_unimprovable,
                    &mut report,
                    dump_samples,
                );
            }
            report.sort();
            (*kind, report)
        })
        .collect();
    Ok(ExperimentResults {
        reports,
        atlas_provenance: eval.atlas_provenance,
        atlas_size: eval.atlas_size,
    })
}

fn run_one(
    spec: &ExperimentSpec,
    kind: ExperimentKind,
    atlas: Option<&BanzhafAtlas>,
) -> Result<AggregateReport> {
    let mut results = run_kinds(spec, &[kind], atlas, false)?;
    Ok(results.reports.remove(0).1)
}

/// Relative improvement of each quota over `q = 0.5`, per starting point and
/// variant.
pub fn run_q_sweep(spec: &ExperimentSpec) -> Result<AggregateReport> {
    run_one(spec, ExperimentKind::QSweep, None)
}

/// Starting points compared at each quota; the baseline is the target start.
pub fn run_omega0_comparison(
    spec: &ExperimentSpec,
    atlas: Option<&BanzhafAtlas>,
) -> Result<AggregateReport> {
    run_one(spec, ExperimentKind::Omega0, atlas)
}

/// Cumulative zero-stop fractions per iteration budget. The relative
/// improvement columns compare budget `k` against budget `k - 1`.
pub fn run_zero_stop_curve(spec: &ExperimentSpec) -> Result<AggregateReport> {
    run_one(spec, ExperimentKind::ZeroStop, None)
}

/// Every variant against the base variant, plus a best-of row.
pub fn run_variant_showdown(
    spec: &ExperimentSpec,
    atlas: Option<&BanzhafAtlas>,
) -> Result<AggregateReport> {
    run_one(spec, ExperimentKind::Showdown, atlas)
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    pub dump_samples: bool,
    pub svg: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtlasInfo {
    pub provenance: String,
    pub vectors: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub spec_sha256: String,
    pub master_seed: u64,
    pub crate_version: String,
    pub report_header: String,
    pub atlas: AtlasInfo,
    pub files: Vec<String>,
    pub spec: ExperimentSpec,
}

/// SHA-256 of the spec's canonical JSON form, hex encoded.
pub fn spec_hash(spec: &ExperimentSpec) -> Result<String> {
    let canonical = serde_json::to_vec(spec)?;
    Ok(Sha256::digest(&canonical)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

/// Runs every kind in `spec.experiments` and writes `<kind>.csv`,
/// `<kind>_details.csv`, `omega0_scatter.csv` and `manifest.json` into
/// `out_dir`, plus per-sample dumps and SVG plots if requested.
pub fn run_experiment(
    spec: &ExperimentSpec,
    out_dir: &Path,
    options: RunOptions,
) -> Result<Manifest> {
    let results = run_kinds(spec, &spec.experiments, None, options.dump_samples)?;
    fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();
    let mut write = |name: String, f: &dyn Fn(&Path) -> Result<()>| -> Result<()> {
        f(&out_dir.join(&name))?;
        files.push(name);
        Ok(())
    };
    for (kind, report) in &results.reports {
        let name = kind.name();
        write(format!("{name}.csv"), &|p| emit_report(report, p))?;
        write(format!("{name}_details.csv"), &|p| emit_details(report, p))?;
        if !report.scatter.is_empty() {
            write(format!("{name}_scatter.csv"), &|p| emit_scatter(report, p))?;
        }
        if options.dump_samples {
            write(format!("{name}_samples.csv"), &|p| emit_samples(report, p))?;
        }
        if options.svg {
            if let Some(svg) = svg::report_plot(*kind, report) {
                write(format!("{name}.svg"), &|p| Ok(fs::write(p, &svg)?))?;
            }
        }
    }

    let manifest = Manifest {
        spec_sha256: spec_hash(spec)?,
        master_seed: spec.master_seed,
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        report_header: REPORT_HEADER.to_string(),
        atlas: AtlasInfo {
            provenance: results.atlas_provenance.to_string(),
            vectors: results.atlas_size,
        },
        files,
        spec: spec.clone(),
    };
    fs::write(
        out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    Ok(manifest)
}
