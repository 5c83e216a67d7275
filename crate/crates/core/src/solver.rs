//! The ratio-update heuristic for the inverse Banzhaf problem,
//! with its restart, minimum-coalition-size and scaling-factor variants.
//!
//! Each iteration measures the normalized Banzhaf index `b` of the current
//! weights under quota `q`, then divides every weight by
//! `(b_i + s) / (t_i + s)` (`s = 0` except for the scaling variant). Weights
//! are never renormalized, so the quota is always compared with absolute
//! coalition weight.
//!
//! The base heuristic cannot continue once some player has zero power. The
//! restart variant instead jumps to the midpoint of the best weights seen so
//! far and the regular centroid; the minimum-size variant changes the game so
//! that small players gain power; the scaling variant keeps every ratio
//! strictly positive.
//!
//! Distances do not decrease monotonically over iterations, so every run
//! tracks the best (weights, power, distance) it has measured.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{raw_banzhaf, PowerVector, RawBanzhafVector, ValuationRule, WeightedVotingGame};
use crate::simplex::{centroid_ordered, d1, offset_target, parse_vector, TargetVector};

/// Default `max_distance`: small enough that runs use their whole budget.
pub const DEFAULT_MAX_DISTANCE: f64 = 1e-9;

/// Where the first iteration starts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Omega0Mode {
    /// The target vector itself.
    Target,
    /// Vertex average of the ordered simplex.
    CentroidOrdered,
    /// Midpoint of the target and the regular centroid.
    OffsetTarget,
    Explicit(Vec<f64>),
}

impl fmt::Display for Omega0Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Omega0Mode::Target => f.write_str("target"),
            Omega0Mode::CentroidOrdered => f.write_str("centroid"),
            Omega0Mode::OffsetTarget => f.write_str("offset"),
            Omega0Mode::Explicit(w) => write!(f, "explicit:{}", crate::simplex::format_vector(w)),
        }
    }
}

impl FromStr for Omega0Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "target" => Ok(Omega0Mode::Target),
            "centroid" => Ok(Omega0Mode::CentroidOrdered),
            "offset" => Ok(Omega0Mode::OffsetTarget),
            _ => match s.strip_prefix("explicit:") {
                Some(csv) => Ok(Omega0Mode::Explicit(parse_vector(csv)?)),
                None => Err(Error::Parse(format!(
                    "unknown starting point `{s}` (expected target, centroid, offset or explicit:<csv>)"
                ))),
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Variant {
    Base,
    Restart,
    /// Require at least this many members in a winning coalition.
    MinCoalition(usize),
    /// Add this constant to both sides of every ratio.
    Scaling(f64),
}

impl Variant {
    /// Valuation rule the variant measures power under.
    pub fn rule(self) -> ValuationRule {
        match self {
            Variant::MinCoalition(m) => ValuationRule::QualifiedMajorityMinSize(m),
            _ => ValuationRule::QualifiedMajority,
        }
    }

    fn scaling(self) -> f64 {
        match self {
            Variant::Scaling(s) => s,
            _ => 0.0,
        }
    }

    pub fn is_base(self) -> bool {
        matches!(self, Variant::Base)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::Base => f.write_str("base"),
            Variant::Restart => f.write_str("restart"),
            Variant::MinCoalition(m) => write!(f, "mincoalition:{m}"),
            Variant::Scaling(s) => write!(f, "scaling:{s}"),
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::Parse(format!(
                "unknown variant `{s}` (expected base, restart, mincoalition:<m> or scaling:<s>)"
            ))
        };
        match s.split_once(':') {
            None if s == "base" => Ok(Variant::Base),
            None if s == "restart" => Ok(Variant::Restart),
            Some(("mincoalition", m)) => m.parse().map(Variant::MinCoalition).map_err(|_| bad()),
            Some(("scaling", v)) => v.parse().map(Variant::Scaling).map_err(|_| bad()),
            _ => Err(bad()),
        }
    }
}

macro_rules! string_serde {
    ($ty:ty) => {
        impl From<$ty> for String {
            fn from(v: $ty) -> String {
                v.to_string()
            }
        }

        impl TryFrom<String> for $ty {
            type Error = Error;

            fn try_from(s: String) -> Result<Self> {
                s.parse()
            }
        }
    };
}

string_serde!(Omega0Mode);
string_serde!(Variant);

/// Which weights a run reports (and restarts from) as its best.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum BestWeightsPolicy {
    /// The weights whose power was measured at the best distance.
    #[default]
    Measured,
    /// The weights produced by the update in the best iteration, as the
    /// restart pseudocode literally assigns them. Their power is unmeasured;
    /// `best_power` still holds the power measured in that iteration.
    PostUpdate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub quota: f64,
    pub omega0: Omega0Mode,
    pub variant: Variant,
    pub max_iterations: usize,
    pub max_distance: f64,
    #[serde(default)]
    pub best_weights: BestWeightsPolicy,
}

impl SolverConfig {
    /// Base heuristic from the target with a 50-iteration budget.
    pub fn new(quota: f64) -> Self {
        SolverConfig {
            quota,
            omega0: Omega0Mode::Target,
            variant: Variant::Base,
            max_iterations: 50,
            max_distance: DEFAULT_MAX_DISTANCE,
            best_weights: BestWeightsPolicy::Measured,
        }
    }

    pub fn with_omega0(mut self, omega0: Omega0Mode) -> Self {
        self.omega0 = omega0;
        self
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    pub fn with_max_distance(mut self, max_distance: f64) -> Self {
        self.max_distance = max_distance;
        self
    }

    pub fn with_best_weights(mut self, policy: BestWeightsPolicy) -> Self {
        self.best_weights = policy;
        self
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.quota >= 0.0) || !self.quota.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "quota {} must be finite and non-negative",
                self.quota
            )));
        }
        if self.max_iterations < 1 {
            return Err(Error::InvalidConfig(
                "max_iterations must be at least 1".into(),
            ));
        }
        if !(self.max_distance >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "max_distance {} must be non-negative",
                self.max_distance
            )));
        }
        match self.variant {
            Variant::MinCoalition(m) if m < 1 || m > n => Err(Error::InvalidConfig(format!(
                "minimum coalition size {m} outside [1, {n}]"
            ))),
            Variant::Scaling(s) if !(s >= 0.0) || !s.is_finite() => Err(Error::InvalidConfig(
                format!("scaling factor {s} must be finite and non-negative"),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StopReason {
    DistanceReached,
    IterationCap,
    ZeroPowerStop,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::DistanceReached => "distance_reached",
            StopReason::IterationCap => "iteration_cap",
            StopReason::ZeroPowerStop => "zero_power_stop",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum IterationAction {
    RatioUpdate,
    RestartJump,
    Stopped(StopReason),
}

impl fmt::Display for IterationAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IterationAction::RatioUpdate => f.write_str("ratio_update"),
            IterationAction::RestartJump => f.write_str("restart_jump"),
            IterationAction::Stopped(reason) => write!(f, "stopped:{reason}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub index: usize,
    pub weights_before: Vec<f64>,
    pub power: PowerVector,
    /// `d1(power, target)`.
    pub distance: f64,
    pub action: IterationAction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverRun {
    pub config: SolverConfig,
    pub target: TargetVector,
    pub trace: Vec<IterationRecord>,
    pub best_weights: Vec<f64>,
    pub best_power: PowerVector,
    pub best_distance: f64,
    pub stop_reason: StopReason,
}

/// What a run would have reported with a smaller iteration budget.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BudgetOutcome {
    pub best_distance: f64,
    pub iterations: usize,
    pub stop_reason: StopReason,
}

impl SolverRun {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }

    /// Distance measured at iteration 0.
    pub fn initial_distance(&self) -> f64 {
        self.trace[0].distance
    }

    /// Outcome of the same run with `budget` iterations. Runs are
    /// deterministic and every stop decision depends only on earlier
    /// iterations, so this is a prefix of the trace.
    pub fn outcome_at(&self, budget: usize) -> BudgetOutcome {
        self.summary().outcome_at(budget)
    }

    pub fn summary(&self) -> RunSummary {
        RunSummary::new(
            self.trace.iter().map(|r| r.distance).collect(),
            self.stop_reason,
        )
    }

    /// Iteration index at which the run stopped on a zero-power vector.
    pub fn zero_stop_index(&self) -> Option<usize> {
        (self.stop_reason == StopReason::ZeroPowerStop).then(|| self.trace.len() - 1)
    }
}

/// Per-iteration distances of a run, enough to answer [`SolverRun::outcome_at`]
/// for any budget in constant time.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub distances: Vec<f64>,
    /// `prefix_best[i]` is the smallest distance among iterations `0..=i`.
    pub prefix_best: Vec<f64>,
    pub stop_reason: StopReason,
}

impl RunSummary {
    pub fn new(distances: Vec<f64>, stop_reason: StopReason) -> Self {
        assert!(!distances.is_empty(), "a run has at least one iteration");
        let prefix_best = distances
            .iter()
            .scan(f64::INFINITY, |best, &d| {
                *best = best.min(d);
                Some(*best)
            })
            .collect();
        RunSummary {
            distances,
            prefix_best,
            stop_reason,
        }
    }

    pub fn initial_distance(&self) -> f64 {
        self.distances[0]
    }

    pub fn outcome_at(&self, budget: usize) -> BudgetOutcome {
        let budget = budget.max(1);
        let iterations = self.distances.len().min(budget);
        let stop_reason = if self.distances.len() <= budget {
            self.stop_reason
        } else {
            StopReason::IterationCap
        };
        BudgetOutcome {
            best_distance: self.prefix_best[iterations - 1],
            iterations,
            stop_reason,
        }
    }
}

/// Result of [`compute_ratio`]. `zero_ratio` is set when some ratio is zero,
/// which makes the plain update undefined.
#[derive(Clone, Debug, PartialEq)]
pub struct Ratio {
    pub values: Vec<f64>,
    pub zero_ratio: bool,
}

/// `(power_i + s) / (target_i + s)` per player.
pub fn compute_ratio(power: &[f64], target: &TargetVector, s: f64) -> Ratio {
    let values: Vec<f64> = power
        .iter()
        .zip(target.values())
        .map(|(&b, &t)| (b + s) / (t + s))
        .collect();
    let zero_ratio = values.contains(&0.0);
    Ratio { values, zero_ratio }
}

/// Starting weights for `mode`.
pub fn resolve_omega0(target: &TargetVector, mode: &Omega0Mode) -> Result<Vec<f64>> {
    Ok(match mode {
        Omega0Mode::Target => target.values().to_vec(),
        Omega0Mode::CentroidOrdered => centroid_ordered(target.n()).into_inner(),
        Omega0Mode::OffsetTarget => offset_target(target).into_inner(),
        Omega0Mode::Explicit(w) => {
            if w.len() != target.n() {
                return Err(Error::ExplicitLengthMismatch {
                    expected: target.n(),
                    found: w.len(),
                });
            }
            w.clone()
        }
    })
}

/// Best pair measured before the current iteration.
#[derive(Clone, Debug)]
pub struct BestSoFar {
    pub weights: Vec<f64>,
    pub power: PowerVector,
    pub distance: f64,
}

#[derive(Clone, Debug)]
pub struct StepOutput {
    pub new_weights: Vec<f64>,
    pub record: IterationRecord,
    pub raw: RawBanzhafVector,
}

/// One iteration: measure power, then update (or jump, or stop).
///
/// `best` is the best pair from earlier iterations of the same run; the
/// restart variant jumps from it. Without it the restart variant treats the
/// current weights as the best so far. The returned record has index 0.
pub fn step(
    weights: &[f64],
    target: &TargetVector,
    config: &SolverConfig,
    best: Option<&BestSoFar>,
) -> Result<StepOutput> {
    let n = target.n();
    if weights.len() != n {
        return Err(Error::LengthMismatch {
            left: weights.len(),
            right: n,
        });
    }
    if let Some((index, &value)) = weights.iter().enumerate().find(|(_, w)| !(**w > 0.0)) {
        return Err(Error::NonPositiveWeight { index, value });
    }
    let game = WeightedVotingGame::new(weights.to_vec(), config.quota, config.variant.rule())?;
    let raw = raw_banzhaf(&game)?;
    let power = raw.normalized();
    let distance = d1(&power.values, target.values());

    let s = config.variant.scaling();
    let zero_power = raw.has_powerless_player();
    let (new_weights, action) = if zero_power && s == 0.0 {
        match config.variant {
            Variant::Restart => {
                let from = match (best, config.best_weights) {
                    (Some(b), BestWeightsPolicy::PostUpdate) => &b.weights[..],
                    (Some(b), BestWeightsPolicy::Measured) if b.distance <= distance => {
                        &b.weights[..]
                    }
                    _ => weights,
                };
                let inv_n = 1.0 / n as f64;
                let jumped = from.iter().map(|&w| (w + inv_n) / 2.0).collect();
                (jumped, IterationAction::RestartJump)
            }
            _ => (
                weights.to_vec(),
                IterationAction::Stopped(StopReason::ZeroPowerStop),
            ),
        }
    } else {
        let ratio = compute_ratio(&power.values, target, s);
        let updated = weights
            .iter()
            .zip(&ratio.values)
            .map(|(w, r)| w / r)
            .collect();
        (updated, IterationAction::RatioUpdate)
    };

    Ok(StepOutput {
        new_weights,
        record: IterationRecord {
            index: 0,
            weights_before: weights.to_vec(),
            power,
            distance,
            action,
        },
        raw,
    })
}

fn weight_key(weights: &[f64]) -> Vec<u64> {
    weights.iter().map(|w| w.to_bits()).collect()
}

/// Runs the heuristic until the distance drops below `max_distance`, the
/// iteration budget is spent, or (for variants that cannot recover) some
/// player ends up with zero power.
pub fn run(target: &TargetVector, config: &SolverConfig) -> Result<SolverRun> {
    let n = target.n();
    if let Some(index) = target.values().iter().position(|&t| t == 0.0) {
        return Err(Error::TargetContainsZero { index });
    }
    config.validate(n)?;

    let mut weights = resolve_omega0(target, &config.omega0)?;
    let mut best: Option<BestSoFar> = match config.best_weights {
        // The literal pseudocode starts from bestweight = omega0.
        BestWeightsPolicy::PostUpdate => Some(BestSoFar {
            weights: weights.clone(),
            power: PowerVector::zeros(n),
            distance: f64::INFINITY,
        }),
        BestWeightsPolicy::Measured => None,
    };
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    seen.insert(weight_key(&weights));

    let mut trace = Vec::with_capacity(config.max_iterations.min(1024));
    let mut stop_reason = StopReason::IterationCap;

    for index in 0..config.max_iterations {
        let StepOutput {
            mut new_weights,
            mut record,
            ..
        } = step(&weights, target, config, best.as_ref())?;
        record.index = index;

        let improved = best.as_ref().is_none_or(|b| record.distance < b.distance);
        if improved {
            let best_weights = match config.best_weights {
                BestWeightsPolicy::Measured => weights.clone(),
                BestWeightsPolicy::PostUpdate => new_weights.clone(),
            };
            best = Some(BestSoFar {
                weights: best_weights,
                power: record.power.clone(),
                distance: record.distance,
            });
        }

        if record.distance < config.max_distance {
            record.action = IterationAction::Stopped(StopReason::DistanceReached);
            stop_reason = StopReason::DistanceReached;
        } else if record.action == IterationAction::RestartJump
            && !seen.insert(weight_key(&new_weights))
        {
            // Deterministic: revisiting weights would replay the same cycle.
            record.action = IterationAction::Stopped(StopReason::ZeroPowerStop);
        }

        if let IterationAction::Stopped(reason) = record.action {
            stop_reason = reason;
            trace.push(record);
            break;
        }
        if record.action == IterationAction::RatioUpdate {
            seen.insert(weight_key(&new_weights));
        }
        trace.push(record);
        std::mem::swap(&mut weights, &mut new_weights);
    }

    let best = best.expect("at least one iteration ran");
    Ok(SolverRun {
        config: config.clone(),
        target: target.clone(),
        trace,
        best_weights: best.weights,
        best_power: best.power,
        best_distance: best.distance,
        stop_reason,
    })
}
