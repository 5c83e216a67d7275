//! Weighted voting games and their Banzhaf indices.
//!
//! A game `[q; w_1, ..., w_n]` assigns every coalition of players the value
//! 1 (winning) or 0 (losing). The Banzhaf index of a player counts the
//! coalitions of *other* players that lose without it and win with it.
//! Indices are computed by exhaustive enumeration of all `2^n` coalitions,
//! so the player count is capped (see [`DEFAULT_PLAYER_CAP`]).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest player count accepted by [`raw_banzhaf`] and [`normalized_banzhaf`].
pub const DEFAULT_PLAYER_CAP: usize = 24;

/// A coalition wins under a quota rule iff its weight exceeds `q + QUOTA_EPSILON`.
pub const QUOTA_EPSILON: f64 = 1e-12;

/// How a coalition's value is decided.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ValuationRule {
    /// Only the grand coalition wins.
    Unanimity,
    /// A coalition wins iff it has more than `ceil(n/2)` members (capped at `n`).
    SimpleMajority,
    /// A coalition wins iff its total weight strictly exceeds the quota.
    QualifiedMajority,
    /// Weight strictly above the quota and at least `min_size` members.
    QualifiedMajorityMinSize(usize),
}

impl ValuationRule {
    fn min_size(self) -> usize {
        match self {
            ValuationRule::QualifiedMajorityMinSize(m) => m,
            _ => 0,
        }
    }
}

/// Minimum number of members for a simple-majority win with `n` players.
///
/// The rule is "more than `ceil(n/2)` members", which gives 9 of 15 for the
/// EU council example. For `n <= 2` that would exclude every coalition, so the
/// threshold is capped at `n`.
pub fn simple_majority_threshold(n: usize) -> usize {
    (n.div_ceil(2) + 1).min(n)
}

/// A set of players, stored as a bitmask over 0-based player indices.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Coalition(pub u64);

impl Coalition {
    pub fn from_players(players: &[usize]) -> Self {
        Coalition(players.iter().fold(0u64, |m, &p| m | (1u64 << p)))
    }

    pub fn contains(self, player: usize) -> bool {
        self.0 >> player & 1 == 1
    }

    pub fn size(self) -> usize {
        self.0.count_ones() as usize
    }
}

/// `[q; w_1, ..., w_n]` together with the rule that turns weights into wins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedVotingGame {
    weights: Vec<f64>,
    quota: f64,
    rule: ValuationRule,
}

impl WeightedVotingGame {
    pub fn new(weights: Vec<f64>, quota: f64, rule: ValuationRule) -> Result<Self> {
        let n = weights.len();
        if n == 0 {
            return Err(Error::InvalidGame(
                "a game needs at least one player".into(),
            ));
        }
        if n > 63 {
            return Err(Error::InvalidGame(format!(
                "{n} players do not fit a coalition mask"
            )));
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(**w >= 0.0) || !w.is_finite())
        {
            return Err(Error::InvalidGame(format!(
                "weight {i} is {w}, expected a finite non-negative value"
            )));
        }
        if !(quota >= 0.0) || !quota.is_finite() {
            return Err(Error::InvalidGame(format!(
                "quota {quota} must be finite and non-negative"
            )));
        }
        if let ValuationRule::QualifiedMajorityMinSize(m) = rule {
            if m < 1 || m > n {
                return Err(Error::InvalidGame(format!(
                    "minimum coalition size {m} outside [1, {n}]"
                )));
            }
        }
        Ok(WeightedVotingGame {
            weights,
            quota,
            rule,
        })
    }

    /// Quota game under [`ValuationRule::QualifiedMajority`].
    pub fn qualified(weights: Vec<f64>, quota: f64) -> Result<Self> {
        Self::new(weights, quota, ValuationRule::QualifiedMajority)
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn quota(&self) -> f64 {
        self.quota
    }

    pub fn rule(&self) -> ValuationRule {
        self.rule
    }

    pub fn with_rule(&self, rule: ValuationRule) -> Result<Self> {
        Self::new(self.weights.clone(), self.quota, rule)
    }

    fn wins(&self, weight: f64, size: usize) -> bool {
        let n = self.n();
        match self.rule {
            ValuationRule::Unanimity => size == n,
            ValuationRule::SimpleMajority => size >= simple_majority_threshold(n),
            ValuationRule::QualifiedMajority | ValuationRule::QualifiedMajorityMinSize(_) => {
                weight > self.quota + QUOTA_EPSILON && size >= self.rule.min_size()
            }
        }
    }

    /// Value of `coalition`: `true` for winning.
    pub fn evaluate_coalition(&self, coalition: Coalition) -> bool {
        let weight: f64 = (0..self.n())
            .filter(|&i| coalition.contains(i))
            .map(|i| self.weights[i])
            .sum();
        self.wins(weight, coalition.size())
    }

    /// Win flag of every coalition, indexed by bitmask.
    pub fn winning_table(&self) -> Vec<bool> {
        let n = self.n();
        // Coalition weights via two half-size subset-sum tables.
        let lo_bits = n / 2;
        let lo_mask = (1usize << lo_bits) - 1;
        let lo = subset_sums(&self.weights[..lo_bits]);
        let hi = subset_sums(&self.weights[lo_bits..]);
        (0..1usize << n)
            .map(|mask| {
                let weight = lo[mask & lo_mask] + hi[mask >> lo_bits];
                self.wins(weight, mask.count_ones() as usize)
            })
            .collect()
    }
}

fn subset_sums(weights: &[f64]) -> Vec<f64> {
    let mut sums = vec![0.0; 1 << weights.len()];
    for mask in 1..sums.len() {
        sums[mask] = sums[mask & (mask - 1)] + weights[mask.trailing_zeros() as usize];
    }
    sums
}

impl fmt::Display for WeightedVotingGame {
    /// Renders the game literal `q; w1,...,wn [minSize=m]`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}; ", self.quota)?;
        for (i, w) in self.weights.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{w}")?;
        }
        if let ValuationRule::QualifiedMajorityMinSize(m) = self.rule {
            write!(f, " minSize={m}")?;
        }
        Ok(())
    }
}

impl FromStr for WeightedVotingGame {
    type Err = Error;

    /// Parses `q; w1,w2,...,wn [minSize=m]`.
    fn from_str(s: &str) -> Result<Self> {
        let (quota, rest) = s
            .split_once(';')
            .ok_or_else(|| Error::Parse(format!("game literal `{s}` is missing `;`")))?;
        let quota: f64 = quota
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad quota `{}`", quota.trim())))?;
        let mut tokens = rest.split_whitespace();
        let weights = tokens
            .next()
            .ok_or_else(|| Error::Parse("game literal has no weights".into()))
            .and_then(crate::simplex::parse_vector)?;
        let mut rule = ValuationRule::QualifiedMajority;
        for token in tokens {
            match token.split_once('=') {
                Some(("minSize", m)) => {
                    let m = m
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad minSize `{m}`")))?;
                    rule = ValuationRule::QualifiedMajorityMinSize(m);
                }
                _ => {
                    return Err(Error::Parse(format!(
                        "unexpected token `{token}` in game literal"
                    )))
                }
            }
        }
        WeightedVotingGame::new(weights, quota, rule)
    }
}

/// Swing counts of every player plus the common denominator `2^(n-1)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawBanzhafVector {
    pub counts: Vec<u64>,
    pub denominator: u64,
}

impl RawBanzhafVector {
    /// True if some player is critical for no coalition.
    pub fn has_powerless_player(&self) -> bool {
        self.counts.contains(&0)
    }

    /// Raw index `counts[i] / 2^(n-1)`.
    pub fn raw_index(&self) -> Vec<f64> {
        let d = self.denominator as f64;
        self.counts.iter().map(|&c| c as f64 / d).collect()
    }

    pub fn normalized(&self) -> PowerVector {
        let total: u64 = self.counts.iter().sum();
        if total == 0 {
            return PowerVector::zeros(self.counts.len());
        }
        let total = total as f64;
        PowerVector {
            values: self.counts.iter().map(|&c| c as f64 / total).collect(),
        }
    }
}

/// A normalized Banzhaf index. Sums to one unless the game has no swings at
/// all, in which case every entry is zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerVector {
    pub values: Vec<f64>,
}

impl PowerVector {
    pub fn new(values: Vec<f64>) -> Self {
        PowerVector { values }
    }

    pub fn zeros(n: usize) -> Self {
        PowerVector {
            values: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_degenerate(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Copy with entries in non-increasing order.
    pub fn sorted_desc(&self) -> PowerVector {
        let mut values = self.values.clone();
        values.sort_by(|a, b| b.total_cmp(a));
        PowerVector { values }
    }
}

impl AsRef<[f64]> for PowerVector {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

/// Per-player swing counts from a coalition win table of length `2^n`.
pub fn swing_counts(n: usize, winning: &[bool]) -> Vec<u64> {
    debug_assert_eq!(winning.len(), 1usize << n);
    let mut counts = vec![0u64; n];
    for (mask, &wins) in winning.iter().enumerate() {
        if !wins {
            continue;
        }
        let mut members = mask;
        while members != 0 {
            let i = members.trailing_zeros() as usize;
            if !winning[mask ^ (1 << i)] {
                counts[i] += 1;
            }
            members &= members - 1;
        }
    }
    counts
}

pub fn raw_banzhaf_capped(game: &WeightedVotingGame, cap: usize) -> Result<RawBanzhafVector> {
    let n = game.n();
    if n > cap {
        return Err(Error::PlayerCountTooLarge { n, cap });
    }
    Ok(RawBanzhafVector {
        counts: swing_counts(n, &game.winning_table()),
        denominator: 1u64 << (n - 1),
    })
}

/// Swing counts with the default player cap.
pub fn raw_banzhaf(game: &WeightedVotingGame) -> Result<RawBanzhafVector> {
    raw_banzhaf_capped(game, DEFAULT_PLAYER_CAP)
}

/// Normalized Banzhaf index; all zeros when no player is ever critical.
pub fn normalized_banzhaf(game: &WeightedVotingGame) -> Result<PowerVector> {
    Ok(raw_banzhaf(game)?.normalized())
}

/// Number of coalitions that can possibly win when at least `min_size`
/// members are required: `sum_{i=min_size}^{n} C(n, i) - 1` for an imposed
/// minimum (`min_size >= 2`), and `2^n - 1` nonempty coalitions when
/// `min_size = 1` imposes nothing.
///
/// Panics unless `1 <= min_size <= n`.
pub fn count_possible_winning_coalitions(n: usize, min_size: usize) -> u128 {
    assert!(
        (1..=n).contains(&min_size),
        "min_size {min_size} outside [1, {n}]"
    );
    if min_size == 1 {
        return (1u128 << n) - 1;
    }
    let mut binom: u128 = 1; // C(n, 0)
    let mut total: u128 = 0;
    for i in 0..=n {
        if i >= min_size {
            total += binom;
        }
        binom = binom * (n - i) as u128 / (i + 1) as u128;
    }
    total - 1
}
