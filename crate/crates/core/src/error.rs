use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Shapes of the operands do not agree.
    DimensionMismatch { expected: usize, found: usize },
    /// Input contains NaN or an infinity.
    NonFinite,
    /// A Cholesky pivot was not positive.
    NotPositiveDefinite { pivot: usize },
    /// Smallest singular value is below the relative rank threshold.
    RankDeficient { ratio: f64 },
    /// Nonpositive curvature inside conjugate gradients.
    Breakdown { iteration: usize },
    /// The Woodbury step needs at least one active coordinate.
    EmptyActiveSet,
    /// A problem or configuration violates its invariants.
    InvalidInput(&'static str),
    /// Ground truth is needed for this diagnostic.
    MissingGroundTruth,
    /// A theorem hypothesis is not satisfied by the supplied constants.
    HypothesisUnmet(&'static str),
    /// Brute-force enumeration guard exceeded.
    TooLarge,
    /// The adversarial initialization could not be computed.
    InnerSolveFailed,
    /// An iterative method hit its iteration limit.
    NotConverged { iterations: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::NonFinite => write!(f, "input contains non-finite values"),
            Error::NotPositiveDefinite { pivot } => {
                write!(f, "matrix is not positive definite (pivot {pivot})")
            }
            Error::RankDeficient { ratio } => write!(
                f,
                "matrix does not have full row rank (sigma_min/sigma_max = {ratio:e})"
            ),
            Error::Breakdown { iteration } => {
                write!(f, "conjugate gradient breakdown at iteration {iteration}")
            }
            Error::EmptyActiveSet => write!(f, "active set is empty"),
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::MissingGroundTruth => write!(f, "ground truth x_star is required"),
            Error::HypothesisUnmet(msg) => write!(f, "hypothesis unmet: {msg}"),
            Error::TooLarge => write!(f, "instance too large for brute-force enumeration"),
            Error::InnerSolveFailed => write!(f, "inner l1 solve failed"),
            Error::NotConverged { iterations } => {
                write!(f, "no convergence within {iterations} iterations")
            }
        }
    }
}

impl core::error::Error for Error {}
