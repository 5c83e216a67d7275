//! Banzhaf power indices of weighted voting games and the inverse problem:
//! given a target power distribution, find weights whose normalized Banzhaf
//! index is close to it under the Manhattan distance.
//!
//! - [`game`]: games, valuation rules, exact Banzhaf indices.
//! - [`simplex`]: target vectors, reference points, `d1`.
//! - [`solver`]: the ratio-update heuristic and its variants.
//! - [`atlas`]: databases of attainable vectors and error bounds.
//! - [`experiment`]: seeded, paired batch experiments and CSV reports.

// Negated float comparisons are used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod atlas;
pub mod error;
pub mod experiment;
pub mod game;
pub mod rng;
pub mod simplex;
pub mod solver;

pub use atlas::{
    build_exact_oracle, build_sampled_atlas, error_bounds, nearest, relative_improvement,
    BanzhafAtlas, ErrorBounds, Provenance,
};
pub use error::{Error, Result};
pub use game::{
    count_possible_winning_coalitions, normalized_banzhaf, raw_banzhaf, Coalition, PowerVector,
    RawBanzhafVector, ValuationRule, WeightedVotingGame,
};
pub use rng::SampleRng;
pub use simplex::{
    centroid_ordered, centroid_regular, d1_distance, max_d1_ordered, offset_target,
    sample_ordered_simplex, SignificanceThresholds, TargetVector,
};
pub use solver::{
    compute_ratio, resolve_omega0, run, step, IterationAction, IterationRecord, Omega0Mode,
    SolverConfig, SolverRun, StopReason, Variant,
};

/// Formats `x` with `digits` significant digits in plain decimal notation,
/// trailing zeros removed. Non-finite values print as `NaN`, `inf`, `-inf`.
pub fn fmt_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exponent = x.abs().log10().floor() as i32;
    let decimals = (digits as i32 - 1 - exponent).max(0) as usize;
    let mut s = format!("{x:.decimals$}");
    if s.contains('.') {
        let trimmed = s.trim_end_matches('0').trim_end_matches('.').len();
        s.truncate(trimmed);
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::fmt_sig;

    #[test]
    fn significant_digits() {
        assert_eq!(fmt_sig(0.6, 17), "0.59999999999999998");
        assert_eq!(fmt_sig(1.0, 17), "1");
        assert_eq!(fmt_sig(0.0, 10), "0");
        assert_eq!(fmt_sig(0.123456789012, 10), "0.123456789");
        assert_eq!(fmt_sig(-1234.5678901234, 10), "-1234.56789");
        assert_eq!(fmt_sig(2.5e-5, 10), "0.000025");
        assert_eq!(fmt_sig(f64::NAN, 10), "NaN");
        for x in [1.0 / 3.0, 0.1, 2.0 / 7.0, 1e-7 / 3.0] {
            assert_eq!(fmt_sig(x, 17).parse::<f64>().unwrap(), x);
        }
    }
}
