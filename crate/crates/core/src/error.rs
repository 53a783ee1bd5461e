//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Non-finite or otherwise malformed numeric input.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Requested rank outside `1..=min(n_rows, n_cols)` or beyond the
    /// available factors.
    #[error("invalid rank {requested} (limit {limit})")]
    InvalidRank { requested: usize, limit: usize },

    /// A singular value needed by the operation is zero.
    #[error("rank deficient: sigma_{0} is zero")]
    RankDeficient(usize),

    /// Observation set too sparse (or emptied by trimming) to carry a
    /// rank-k subspace.
    #[error("degenerate observation: {0}")]
    DegenerateObservation(String),

    /// Leverage profile lacks the cross-score block the operation needs.
    #[error("profile has no cross-leverage block")]
    NeedsCross,

    /// Row-weighting step size outside (0, 1).
    #[error("invalid step gamma = {0}; must lie in (0, 1)")]
    InvalidStep(f64),

    /// Leverage value outside the domain of a step-size formula.
    #[error("invalid leverage: {0}")]
    InvalidLeverage(String),

    #[error("invalid dimensions: {0}")]
    InvalidDims(String),

    #[error("marginals must be nonnegative with a positive sum")]
    InvalidMarginals,

    /// A weight that must be strictly positive is zero (or denormal).
    #[error("singular weight at index {0}")]
    SingularWeight(usize),

    /// Reference matrix is zero, so a relative error is undefined.
    #[error("relative error undefined: reference matrix is zero")]
    UndefinedReference,

    #[error("shape mismatch: {left} vs {right}")]
    ShapeMismatch { left: String, right: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}
