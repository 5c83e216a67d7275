use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{n} players exceeds the enumeration cap of {cap}")]
    PlayerCountTooLarge { n: usize, cap: usize },

    #[error("vector lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("weight {index} is {value}, weights must be strictly positive")]
    NonPositiveWeight { index: usize, value: f64 },

    #[error("target entry {index} is zero; the ratio update needs strictly positive targets")]
    TargetContainsZero { index: usize },

    #[error("explicit starting weights have {found} entries, target has {expected}")]
    ExplicitLengthMismatch { expected: usize, found: usize },

    #[error("exact oracle supports at most 5 players, got {n}")]
    OracleTooLarge { n: usize },

    #[error("atlas is empty")]
    EmptyAtlas,

    #[error("baseline distance is zero; relative improvement is undefined")]
    BaselineZero,

    #[error("invalid game: {0}")]
    InvalidGame(String),

    #[error("invalid vector: {0}")]
    InvalidVector(String),

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
