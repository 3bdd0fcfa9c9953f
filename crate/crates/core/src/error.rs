use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid character {ch:?} at position {position}")]
    InvalidCharacter { position: usize, ch: char },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("precondition violated: {0}")]
    PrecondViolation(String),

    #[error("pool has no readable molecules")]
    EmptyPool,

    #[error("no matches in the requested stratum")]
    EmptyStratum,

    #[error("no substitutions observed")]
    NoSubstitutions,

    #[error("counts are not overdispersed (mean {mean}, variance {variance})")]
    Underdispersed { mean: f64, variance: f64 },

    #[error("duplicate reference sequence (ids {first} and {second})")]
    DuplicateSequence { first: usize, second: usize },
}
