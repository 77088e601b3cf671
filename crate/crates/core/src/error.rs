use crate::recovery::MatchingResult;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("item {0} is not in the independent set")]
    NotInIndependentSet(usize),

    #[error("basis rows are rank deficient: rank {rank} < {expected}")]
    RankDeficientBasis { rank: usize, expected: usize },

    #[error("item {item} lies outside the basis span (residual {residual:.3e})")]
    OutsideSpan { item: usize, residual: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("score {value:.6e} of item {item} must be positive under the multiplicative form")]
    NonPositiveScore { item: usize, value: f64 },

    #[error("degenerate preference probability {value} for pair ({i}, {j})")]
    DegenerateProbability { i: usize, j: usize, value: f64 },

    #[error("empty comparison sample")]
    EmptySample,

    #[error("comparisons carry no information about the basis scores")]
    NoInformation,

    #[error("equation system admits no null direction; input is inconsistent or noisy")]
    NoSolution,

    /// Nullity of the equation system is at least two. Carries the coverage
    /// check so callers can inspect the Hall witness when one exists.
    #[error("equation system is underdetermined (nullity >= 2)")]
    Underdetermined { matching: Box<MatchingResult> },

    #[error("no closed-form sampling threshold for family `{0}`")]
    UnsupportedFamily(String),

    #[error("subset enumeration budget exceeded (alpha {alpha}, q_max {q_max})")]
    EnumerationBudget { alpha: usize, q_max: usize },

    #[error("matrix has an all-zero spectrum")]
    ZeroSpectrum,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidParameter(message.into())
    }
}
