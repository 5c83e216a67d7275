//! Databases of attainable Banzhaf vectors and the error metrics built on them.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt_sig;
use crate::game::{swing_counts, PowerVector};
use crate::rng::SampleRng;
use crate::simplex::{d1, sample_ordered_simplex, TargetVector, SUM_TOLERANCE};
use crate::solver::{run, SolverConfig};

/// Two vectors closer than this under `d1` are the same atlas entry.
pub const DEDUP_TOLERANCE: f64 = 1e-9;

/// Largest player count the exact oracle enumerates.
pub const ORACLE_MAX_PLAYERS: usize = 5;

/// Atlases at least this large are scanned in parallel by [`nearest`].
const PARALLEL_SCAN_MIN: usize = 1 << 14;

/// Safety valve on the number of samples a sampled build may draw.
pub const SAMPLED_BUILD_SAMPLE_CAP: u64 = 10_000_000;

/// Where an atlas's vectors came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    /// Every integer-weight game with weights up to `max_weight`.
    ExactOracle { max_weight: u32 },
    /// Solver runs on random targets until `stability_window` consecutive
    /// samples added nothing.
    SampledRuns { stability_window: u64 },
    /// Vectors seen by the solver runs of one experiment.
    RunTraces,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::ExactOracle { max_weight } => write!(f, "exact_oracle:{max_weight}"),
            Provenance::SampledRuns { stability_window } => {
                write!(f, "sampled_runs:{stability_window}")
            }
            Provenance::RunTraces => f.write_str("run_traces"),
        }
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("unknown atlas provenance `{s}`"));
        match s.split_once(':') {
            Some(("exact_oracle", w)) => Ok(Provenance::ExactOracle {
                max_weight: w.parse().map_err(|_| bad())?,
            }),
            Some(("sampled_runs", w)) => Ok(Provenance::SampledRuns {
                stability_window: w.parse().map_err(|_| bad())?,
            }),
            None if s == "run_traces" => Ok(Provenance::RunTraces),
            _ => Err(bad()),
        }
    }
}

/// Dedup key: coordinates rounded to a grid much finer than the tolerance.
fn dedup_key(values: &[f64]) -> Vec<i64> {
    values.iter().map(|v| (v * 1e12).round() as i64).collect()
}

/// A deduplicated set of normalized Banzhaf vectors for a fixed player count,
/// each stored sorted non-increasingly.
#[derive(Clone, Debug)]
pub struct BanzhafAtlas {
    n: usize,
    provenance: Provenance,
    vectors: Vec<PowerVector>,
    keys: HashSet<Vec<i64>>,
}

impl BanzhafAtlas {
    pub fn new(n: usize, provenance: Provenance) -> Self {
        BanzhafAtlas {
            n,
            provenance,
            vectors: Vec::new(),
            keys: HashSet::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[PowerVector] {
        &self.vectors
    }

    /// Adds the canonical (sorted) form of `power`. Returns whether it was
    /// new. Degenerate all-zero vectors are not Banzhaf vectors of any
    /// meaningful game and are skipped.
    pub fn insert(&mut self, power: &PowerVector) -> bool {
        assert_eq!(
            power.len(),
            self.n,
            "power vector length does not match atlas"
        );
        if power.is_degenerate() {
            return false;
        }
        let canonical = power.sorted_desc();
        debug_assert!((canonical.values.iter().sum::<f64>() - 1.0).abs() <= SUM_TOLERANCE);
        if self.keys.insert(dedup_key(&canonical.values)) {
            self.vectors.push(canonical);
            true
        } else {
            false
        }
    }

    /// Vectors sorted lexicographically descending.
    pub fn sorted_vectors(&self) -> Vec<&PowerVector> {
        let mut out: Vec<&PowerVector> = self.vectors.iter().collect();
        out.sort_by(|a, b| lex_cmp(&b.values, &a.values));
        out
    }

    /// Writes the atlas: a header `n=<n>,provenance=<p>` and one vector per
    /// line at 17 significant digits, lexicographically descending.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "n={},provenance={}", self.n, self.provenance)?;
        for v in self.sorted_vectors() {
            let line: Vec<String> = v.values.iter().map(|&x| fmt_sig(x, 17)).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("atlas file is empty".into()))??;
        let (n_part, prov_part) = header
            .split_once(',')
            .ok_or_else(|| Error::Parse(format!("bad atlas header `{header}`")))?;
        let n: usize = n_part
            .strip_prefix("n=")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad atlas header `{header}`")))?;
        let provenance: Provenance = prov_part
            .strip_prefix("provenance=")
            .ok_or_else(|| Error::Parse(format!("bad atlas header `{header}`")))?
            .parse()?;
        let mut atlas = BanzhafAtlas::new(n, provenance);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let values = crate::simplex::parse_vector(&line)?;
            if values.len() != n {
                return Err(Error::Parse(format!(
                    "atlas line has {} entries, expected {n}",
                    values.len()
                )));
            }
            let sum: f64 = values.iter().sum();
            if (sum - 1.0).abs() > SUM_TOLERANCE {
                return Err(Error::Parse(format!("atlas vector sums to {sum}")));
            }
            atlas.insert(&PowerVector::new(values));
        }
        Ok(atlas)
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

/// Calls `f` with every non-increasing integer weight vector with entries in
/// `0..=max_weight`.
fn for_each_weight_vector(n: usize, max_weight: u32, f: &mut impl FnMut(&[u32])) {
    fn rec(buf: &mut Vec<u32>, n: usize, upper: u32, f: &mut impl FnMut(&[u32])) {
        if buf.len() == n {
            f(buf);
            return;
        }
        for w in 0..=upper {
            buf.push(w);
            rec(buf, n, w, f);
            buf.pop();
        }
    }
    rec(&mut Vec::with_capacity(n), n, max_weight, f);
}

/// Every normalized Banzhaf vector of an integer-weight game on `n <= 5`
/// players with weights in `0..=max_weight` and integer quota
/// `q in 0..sum(w)` (a coalition wins iff its weight exceeds `q`).
/// Games are deduplicated by their set of winning coalitions first.
pub fn build_exact_oracle(n: usize, max_weight: u32) -> Result<BanzhafAtlas> {
    if n > ORACLE_MAX_PLAYERS {
        return Err(Error::OracleTooLarge { n });
    }
    if n == 0 {
        return Err(Error::InvalidGame(
            "a game needs at least one player".into(),
        ));
    }
    let size = 1usize << n;
    // With n <= 5 the winning set fits in 32 bits.
    let mut games: BTreeSet<u32> = BTreeSet::new();
    let mut sums = vec![0u32; size];
    for_each_weight_vector(n, max_weight, &mut |w| {
        for mask in 1..size {
            sums[mask] = sums[mask & (mask - 1)] + w[mask.trailing_zeros() as usize];
        }
        let total = sums[size - 1];
        let mut thresholds: Vec<u32> = sums.iter().copied().filter(|&s| s < total).collect();
        thresholds.sort_unstable();
        thresholds.dedup();
        // Quotas between two consecutive coalition weights give the same game.
        for q in thresholds {
            let winning = sums
                .iter()
                .enumerate()
                .filter(|(_, &s)| s > q)
                .fold(0u32, |acc, (mask, _)| acc | (1 << mask));
            games.insert(winning);
        }
    });

    let mut atlas = BanzhafAtlas::new(n, Provenance::ExactOracle { max_weight });
    for winning in games {
        let table: Vec<bool> = (0..size).map(|mask| winning >> mask & 1 == 1).collect();
        let counts = swing_counts(n, &table);
        let total: u64 = counts.iter().sum();
        let power = PowerVector::new(counts.iter().map(|&c| c as f64 / total as f64).collect());
        atlas.insert(&power);
    }
    Ok(atlas)
}

/// Summary of a sampled build.
#[derive(Clone, Debug)]
pub struct SampledBuild {
    pub atlas: BanzhafAtlas,
    pub samples: u64,
    /// False if the sample cap stopped the build before it was stable.
    pub stable: bool,
}

/// Database built from solver runs: samples targets, runs the solver and
/// stores every per-iteration power vector, until `stability_window`
/// consecutive samples add nothing new (or `max_samples` is reached).
///
/// Sample `i` uses the stream [`SampleRng::for_sample`]`(seed, i)`.
pub fn build_sampled_atlas(
    n: usize,
    config: &SolverConfig,
    seed: u64,
    stability_window: u64,
    max_samples: Option<u64>,
) -> Result<SampledBuild> {
    let cap = max_samples
        .unwrap_or(SAMPLED_BUILD_SAMPLE_CAP)
        .min(SAMPLED_BUILD_SAMPLE_CAP);
    let mut atlas = BanzhafAtlas::new(n, Provenance::SampledRuns { stability_window });
    let mut stale = 0u64;
    let mut samples = 0u64;
    while samples < cap {
        let t = sample_ordered_simplex(n, &mut SampleRng::for_sample(seed, samples));
        samples += 1;
        let result = run(&t, config)?;
        let mut added = false;
        for record in &result.trace {
            added |= atlas.insert(&record.power);
        }
        if added {
            stale = 0;
        } else {
            stale += 1;
            if stale >= stability_window {
                return Ok(SampledBuild {
                    atlas,
                    samples,
                    stable: true,
                });
            }
        }
    }
    Ok(SampledBuild {
        atlas,
        samples,
        stable: false,
    })
}

/// The stored vector closest to `t` under `d1`, and its distance. Ties go to
/// the lexicographically largest vector.
pub fn nearest<'a>(atlas: &'a BanzhafAtlas, t: &[f64]) -> Result<(&'a PowerVector, f64)> {
    if t.len() != atlas.n {
        return Err(Error::LengthMismatch {
            left: atlas.n,
            right: t.len(),
        });
    }
    let better = |a: (&'a PowerVector, f64), b: (&'a PowerVector, f64)| match a.1.total_cmp(&b.1) {
        std::cmp::Ordering::Less => a,
        std::cmp::Ordering::Greater => b,
        std::cmp::Ordering::Equal => {
            if lex_cmp(&a.0.values, &b.0.values).is_ge() {
                a
            } else {
                b
            }
        }
    };
    let scored = |v: &'a PowerVector| (v, d1(&v.values, t));
    let found = if atlas.vectors.len() < PARALLEL_SCAN_MIN {
        atlas.vectors.iter().map(scored).reduce(better)
    } else {
        atlas.vectors.par_iter().map(scored).reduce_with(better)
    };
    found.ok_or(Error::EmptyAtlas)
}

/// Bounds on the error of an algorithm output for target `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBounds {
    /// `d1(t, output)`.
    pub upper: f64,
    /// `d1(t, output) - d1(t, best known)`, clamped at zero.
    pub lower: f64,
    pub best_known: PowerVector,
}

pub fn error_bounds(
    t: &TargetVector,
    output: &PowerVector,
    atlas: &BanzhafAtlas,
) -> Result<ErrorBounds> {
    if output.len() != t.n() {
        return Err(Error::LengthMismatch {
            left: t.n(),
            right: output.len(),
        });
    }
    let (best, best_distance) = nearest(atlas, t.values())?;
    Ok(error_bounds_from_distances(
        d1(t.values(), &output.values),
        best_distance,
        best.clone(),
    ))
}

pub(crate) fn error_bounds_from_distances(
    upper: f64,
    best_distance: f64,
    best_known: PowerVector,
) -> ErrorBounds {
    ErrorBounds {
        upper,
        lower: (upper - best_distance).max(0.0),
        best_known,
    }
}

/// `(baseline - candidate) / baseline`; negative when the candidate is worse.
pub fn relative_improvement(baseline: f64, candidate: f64) -> Result<f64> {
    if baseline == 0.0 {
        return Err(Error::BaselineZero);
    }
    Ok((baseline - candidate) / baseline)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(v: &[f64]) -> PowerVector {
        PowerVector::new(v.to_vec())
    }

    fn contains(atlas: &BanzhafAtlas, v: &[f64]) -> bool {
        atlas.vectors().iter().any(|x| d1(&x.values, v) < 1e-9)
    }

    #[test]
    fn oracle_small_sizes() {
        let a = build_exact_oracle(1, 2).unwrap();
        assert_eq!(a.len(), 1);
        assert!(contains(&a, &[1.0]));

        let a = build_exact_oracle(2, 4).unwrap();
        assert_eq!(a.len(), 2);
        assert!(contains(&a, &[1.0, 0.0]));
        assert!(contains(&a, &[0.5, 0.5]));

        let a = build_exact_oracle(3, 8).unwrap();
        assert_eq!(a.len(), 4);
        for v in [
            [1.0, 0.0, 0.0],
            [0.5, 0.5, 0.0],
            [0.6, 0.2, 0.2],
            [1.0 / 3.0; 3],
        ] {
            assert!(contains(&a, &v), "{v:?} missing");
        }
    }

    #[test]
    fn oracle_rejects_large_n() {
        assert!(matches!(
            build_exact_oracle(6, 8),
            Err(Error::OracleTooLarge { n: 6 })
        ));
    }

    #[test]
    fn insert_dedups_and_canonicalizes() {
        let mut a = BanzhafAtlas::new(3, Provenance::RunTraces);
        assert!(a.insert(&pv(&[0.2, 0.6, 0.2])));
        assert!(!a.insert(&pv(&[0.6, 0.2, 0.2])));
        assert!(!a.insert(&pv(&[0.6 + 1e-14, 0.2, 0.2 - 1e-14])));
        assert!(!a.insert(&pv(&[0.0, 0.0, 0.0])));
        assert_eq!(a.len(), 1);
        assert_eq!(a.vectors()[0].values, vec![0.6, 0.2, 0.2]);
    }

    #[test]
    fn nearest_examples() {
        let a3 = build_exact_oracle(3, 8).unwrap();
        let (v, d) = nearest(&a3, &[1.0 / 3.0; 3]).unwrap();
        assert_eq!(v.values, vec![1.0 / 3.0; 3]);
        assert_eq!(d, 0.0);

        let a2 = build_exact_oracle(2, 4).unwrap();
        let (v, d) = nearest(&a2, &[0.75, 0.25]).unwrap();
        assert_eq!(d, 0.5);
        assert_eq!(v.values, vec![1.0, 0.0]);

        let (v, d) = nearest(&a3, &[0.9, 0.05, 0.05]).unwrap();
        assert_eq!(v.values, vec![1.0, 0.0, 0.0]);
        assert!((d - 0.2).abs() < 1e-12);

        let empty = BanzhafAtlas::new(3, Provenance::RunTraces);
        assert!(matches!(
            nearest(&empty, &[1.0, 0.0, 0.0]),
            Err(Error::EmptyAtlas)
        ));
        assert!(nearest(&a3, &[1.0]).is_err());
    }

    #[test]
    fn error_bounds_examples() {
        let a2 = build_exact_oracle(2, 4).unwrap();
        let t = TargetVector::new(vec![0.75, 0.25]).unwrap();
        let b = error_bounds(&t, &pv(&[1.0, 0.0]), &a2).unwrap();
        assert_eq!((b.upper, b.lower), (0.5, 0.0));

        let a3 = build_exact_oracle(3, 8).unwrap();
        let t = TargetVector::new(vec![0.9, 0.05, 0.05]).unwrap();
        let b = error_bounds(&t, &pv(&[1.0 / 3.0; 3]), &a3).unwrap();
        assert!((b.upper - 1.7 / 1.5).abs() < 1e-12);
        assert!((b.lower - (1.7 / 1.5 - 0.2)).abs() < 1e-12);
        assert_eq!(b.best_known.values, vec![1.0, 0.0, 0.0]);

        let b = error_bounds(&t, &pv(&[1.0, 0.0, 0.0]), &a3).unwrap();
        assert_eq!(b.lower, 0.0);
    }

    #[test]
    fn relative_improvement_examples() {
        assert_eq!(relative_improvement(0.3, 0.3).unwrap(), 0.0);
        assert!((relative_improvement(0.4, 0.1).unwrap() - 0.75).abs() < 1e-15);
        assert!((relative_improvement(0.2, 0.3).unwrap() + 0.5).abs() < 1e-12);
        assert!(matches!(
            relative_improvement(0.0, 0.1),
            Err(Error::BaselineZero)
        ));
    }

    #[test]
    fn persistence_round_trip() {
        let a = build_exact_oracle(3, 8).unwrap();
        let mut buf = Vec::new();
        a.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("n=3,provenance=exact_oracle:8"));
        assert_eq!(lines.next(), Some("1,0,0"));
        assert_eq!(
            lines.next(),
            Some("0.59999999999999998,0.20000000000000001,0.20000000000000001")
        );
        let back = BanzhafAtlas::read_from(&buf[..]).unwrap();
        assert_eq!(back.provenance(), a.provenance());
        let mut x: Vec<_> = back.sorted_vectors().into_iter().cloned().collect();
        let mut y: Vec<_> = a.sorted_vectors().into_iter().cloned().collect();
        x.sort_by(|p, q| lex_cmp(&p.values, &q.values));
        y.sort_by(|p, q| lex_cmp(&p.values, &q.values));
        assert_eq!(x, y);

        assert!(BanzhafAtlas::read_from(&b"n=3\n"[..]).is_err());
        assert!(BanzhafAtlas::read_from(&b"n=2,provenance=run_traces\n0.5,0.4\n"[..]).is_err());
    }

    #[test]
    fn sampled_single_player() {
        let build = build_sampled_atlas(1, &SolverConfig::new(0.5), 9, 250, None).unwrap();
        assert_eq!(build.atlas.len(), 1);
        assert_eq!(build.samples, 251);
        assert!(build.stable);
    }
}
