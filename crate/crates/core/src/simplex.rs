//! Target vectors in the ordered regular simplex and the `d1` metric.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SampleRng;

/// Tolerance on `sum == 1` for target and power vectors.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// A point of the ordered regular simplex: non-negative, summing to one and
/// sorted non-increasingly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TargetVector(Vec<f64>);

impl TargetVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidVector("target vector is empty".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidVector(format!(
                "entry {v} is not a finite non-negative value"
            )));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidVector(format!(
                "entries sum to {sum}, expected 1"
            )));
        }
        if values.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidVector(
                "entries must be in non-increasing order".into(),
            ));
        }
        Ok(TargetVector(values))
    }

    /// Sorts `values` non-increasingly, then validates.
    pub fn from_unsorted(mut values: Vec<f64>) -> Result<Self> {
        values.sort_by(|a, b| b.total_cmp(a));
        Self::new(values)
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for TargetVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        TargetVector::new(values)
    }
}

impl From<TargetVector> for Vec<f64> {
    fn from(t: TargetVector) -> Self {
        t.0
    }
}

impl AsRef<[f64]> for TargetVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Fixed thresholds above which a difference counts as significant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignificanceThresholds {
    /// Relative improvement.
    pub improvement_significant: f64,
    /// Mean upper-bound error: 10% of the conjectured worst optimum distance 14/34.
    pub error_upper_significant: f64,
    /// Change in error: 1% of the largest `d1` in the ordered simplex.
    pub error_change_significant: f64,
}

impl SignificanceThresholds {
    pub fn for_players(n: usize) -> Self {
        SignificanceThresholds {
            improvement_significant: 0.05,
            error_upper_significant: 7.0 / 185.0,
            error_change_significant: 0.01 * max_d1_ordered(n),
        }
    }
}

/// Uniform draw from the ordered simplex: `-ln U` per coordinate, normalized,
/// then sorted non-increasingly.
pub fn sample_ordered_simplex(n: usize, rng: &mut SampleRng) -> TargetVector {
    assert!(n >= 1, "simplex dimension must be at least 1");
    let mut values: Vec<f64> = (0..n).map(|_| -rng.next_open01().ln()).collect();
    let sum: f64 = values.iter().sum();
    for v in &mut values {
        *v /= sum;
    }
    values.sort_by(|a, b| b.total_cmp(a));
    TargetVector(values)
}

/// Average of the `n` vertices `[1/k, ..., 1/k, 0, ..., 0]` of the ordered simplex.
///
/// Entry `j` (0-based) is `(1/n) * sum_{k=j+1}^{n} 1/k`.
pub fn centroid_ordered(n: usize) -> TargetVector {
    assert!(n >= 1, "simplex dimension must be at least 1");
    let mut values = vec![0.0; n];
    let mut tail = 0.0;
    for j in (0..n).rev() {
        tail += 1.0 / (j + 1) as f64;
        values[j] = tail / n as f64;
    }
    TargetVector(values)
}

/// The all-`1/n` vector.
pub fn centroid_regular(n: usize) -> TargetVector {
    assert!(n >= 1, "simplex dimension must be at least 1");
    TargetVector(vec![1.0 / n as f64; n])
}

/// Midpoint of `t` and the regular centroid.
pub fn offset_target(t: &TargetVector) -> TargetVector {
    let inv_n = 1.0 / t.n() as f64;
    TargetVector(t.0.iter().map(|&v| (v + inv_n) / 2.0).collect())
}

/// Manhattan distance `sum |a_i - b_i|`.
pub fn d1_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(d1(a, b))
}

/// [`d1_distance`] for callers that already checked the lengths.
pub(crate) fn d1(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Largest `d1` between two points of the ordered simplex, `2 - 2/n`.
pub fn max_d1_ordered(n: usize) -> f64 {
    2.0 - 2.0 / n as f64
}

/// Parses comma-separated decimals such as `0.35,0.3,0.2,0.15`.
pub fn parse_vector(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|part| {
            let part = part.trim();
            part.parse::<f64>()
                .map_err(|_| Error::Parse(format!("`{part}` is not a decimal number")))
        })
        .collect()
}

pub fn format_vector(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Writes samples as CSV rows `sample_id,i,t_i` with 1-based `i`.
pub fn write_samples_csv<W: Write>(mut out: W, samples: &[TargetVector]) -> Result<()> {
    writeln!(out, "sample_id,i,t_i")?;
    for (id, t) in samples.iter().enumerate() {
        for (i, v) in t.values().iter().enumerate() {
            writeln!(out, "{id},{},{v:?}", i + 1)?;
        }
    }
    Ok(())
}
