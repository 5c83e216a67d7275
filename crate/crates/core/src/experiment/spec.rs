use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::DEFAULT_PLAYER_CAP;
use crate::solver::{Omega0Mode, Variant};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Relative improvement of every quota over `q = 0.5`.
    QSweep,
    /// Starting-point comparison: initial distance, worst and mean error.
    Omega0,
    /// Cumulative fraction of runs stopped on a zero-power vector.
    ZeroStop,
    /// Variants against the base heuristic on the same samples.
    Showdown,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 4] = [
        ExperimentKind::QSweep,
        ExperimentKind::Omega0,
        ExperimentKind::ZeroStop,
        ExperimentKind::Showdown,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::QSweep => "q_sweep",
            ExperimentKind::Omega0 => "omega0",
            ExperimentKind::ZeroStop => "zero_stop",
            ExperimentKind::Showdown => "showdown",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A variant, optionally pinned to its own quota instead of the quota grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "VariantSpecRepr")]
pub struct VariantSpec {
    pub variant: Variant,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quota: Option<f64>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum VariantSpecRepr {
    Plain(Variant),
    Pinned {
        variant: Variant,
        quota: Option<f64>,
    },
}

impl From<VariantSpecRepr> for VariantSpec {
    fn from(repr: VariantSpecRepr) -> Self {
        match repr {
            VariantSpecRepr::Plain(variant) => VariantSpec {
                variant,
                quota: None,
            },
            VariantSpecRepr::Pinned { variant, quota } => VariantSpec { variant, quota },
        }
    }
}

impl From<Variant> for VariantSpec {
    fn from(variant: Variant) -> Self {
        VariantSpec {
            variant,
            quota: None,
        }
    }
}

impl VariantSpec {
    pub fn pinned(variant: Variant, quota: f64) -> Self {
        VariantSpec {
            variant,
            quota: Some(quota),
        }
    }

    /// Report label, e.g. `scaling:0.4@q=0.5` for a pinned quota.
    pub fn label(&self) -> String {
        match self.quota {
            Some(q) => format!("{}@q={q}", self.variant),
            None => self.variant.to_string(),
        }
    }

    pub fn quota_for(&self, grid_quota: f64) -> f64 {
        self.quota.unwrap_or(grid_quota)
    }
}

fn all_kinds() -> Vec<ExperimentKind> {
    ExperimentKind::ALL.to_vec()
}

/// One batch experiment. Every cell runs on the same `sample_count` targets,
/// sample `i` drawn from the stream derived from `(master_seed, i)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub n: usize,
    pub sample_count: usize,
    pub master_seed: u64,
    pub quota_grid: Vec<f64>,
    pub omega0_modes: Vec<Omega0Mode>,
    pub variants: Vec<VariantSpec>,
    /// Iteration budgets to report; runs use the largest.
    pub iteration_grid: Vec<usize>,
    /// Atlas file for error lower bounds. Without one, the vectors seen by
    /// this experiment's own runs are used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atlas_path: Option<PathBuf>,
    #[serde(default = "all_kinds")]
    pub experiments: Vec<ExperimentKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_distance: Option<f64>,
    /// Drop samples the baseline never improved (final distance equal to the
    /// initial one) from relative-improvement aggregates.
    #[serde(default)]
    pub exclude_unimprovable: bool,
}

/// The quota every sweep is compared against.
pub const BASELINE_QUOTA: f64 = 0.5;

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidSpec(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn max_iterations(&self) -> usize {
        self.iteration_grid.iter().copied().max().unwrap_or(1)
    }

    /// Variants deduplicated by variant, ignoring pinned quotas.
    pub(crate) fn unpinned_variants(&self) -> Vec<Variant> {
        let mut out: Vec<Variant> = Vec::new();
        for v in &self.variants {
            if !out.contains(&v.variant) {
                out.push(v.variant);
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.n == 0 || self.n > DEFAULT_PLAYER_CAP {
            return bad(format!("n = {} outside [1, {DEFAULT_PLAYER_CAP}]", self.n));
        }
        if self.sample_count == 0 {
            return bad("sample_count must be at least 1".into());
        }
        if self.quota_grid.is_empty() || self.omega0_modes.is_empty() || self.variants.is_empty() {
            return bad("quota_grid, omega0_modes and variants must be non-empty".into());
        }
        if self.iteration_grid.is_empty() || self.iteration_grid.contains(&0) {
            return bad("iteration_grid must be non-empty with entries >= 1".into());
        }
        if self.experiments.is_empty() {
            return bad("experiments must be non-empty".into());
        }
        let pinned = self.variants.iter().filter_map(|v| v.quota);
        if let Some(q) = self
            .quota_grid
            .iter()
            .copied()
            .chain(pinned)
            .find(|q| !(*q > 0.0 && *q < 1.0))
        {
            return bad(format!("quota {q} outside (0, 1)"));
        }
        if let Some(d) = self.max_distance {
            if !(d >= 0.0) {
                return bad(format!("max_distance {d} must be non-negative"));
            }
        }
        for mode in &self.omega0_modes {
            if let Omega0Mode::Explicit(w) = mode {
                if w.len() != self.n || w.iter().any(|x| !(*x > 0.0)) {
                    return bad(format!(
                        "explicit starting point needs {} positive entries",
                        self.n
                    ));
                }
            }
        }
        for v in &self.variants {
            match v.variant {
                Variant::MinCoalition(m) if m < 1 || m > self.n => {
                    return bad(format!(
                        "minimum coalition size {m} outside [1, {}]",
                        self.n
                    ));
                }
                Variant::Scaling(s) if !(s >= 0.0) || !s.is_finite() => {
                    return bad(format!("scaling factor {s} must be non-negative"));
                }
                _ => {}
            }
        }
        let mut labels = HashSet::new();
        if let Some(v) = self.variants.iter().find(|v| !labels.insert(v.label())) {
            return bad(format!("variant `{}` listed twice", v.label()));
        }
        let mut modes = HashSet::new();
        if let Some(m) = self
            .omega0_modes
            .iter()
            .find(|m| !modes.insert(m.to_string()))
        {
            return bad(format!("starting point `{m}` listed twice"));
        }
        for kind in &self.experiments {
            match kind {
                ExperimentKind::QSweep if !self.quota_grid.contains(&BASELINE_QUOTA) => {
                    return bad(format!("q_sweep needs {BASELINE_QUOTA} in quota_grid"));
                }
                ExperimentKind::Showdown if !self.variants.iter().any(|v| v.variant.is_base()) => {
                    return bad("showdown needs the base variant".into());
                }
                _ => {}
            }
        }
        Ok(())
    }
}
