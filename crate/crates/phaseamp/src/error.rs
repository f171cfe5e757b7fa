//! Crate-wide error type.

use std::fmt;

#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// A parameter was outside its documented domain.
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },
    /// A truncated distribution hit its hard cap before reaching the
    /// requested tail mass; carries the tail mass actually achieved.
    Truncation { achieved_tail: f64, hard_cap: usize },
    /// The exact thinning transform was asked to process a distribution
    /// larger than its size guard; use the moment or sampling path instead.
    ThinningSizeGuard { n_max: usize, limit: usize },
    /// The truncated-operator oracle cannot resolve the requested gain at
    /// the given dimension (mass lost past the cutoff exceeds the bound).
    OracleResolution { lost_mass: f64, dim: usize },
    /// Parameters fall outside the regime an operation is defined for.
    Regime { what: &'static str },
    /// Least-squares normal equations were singular or the data cannot
    /// identify the model parameters.
    DegenerateFit { what: &'static str },
    /// Fit did not converge within its evaluation budget; carries the best
    /// objective value reached.
    FitDidNotConverge { best_cost: f64 },
    /// Every trial of a threshold scan was inconclusive.
    AllInconclusive,
    /// A Monte Carlo worker panicked.
    WorkerPanic { worker: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter {
                name,
                value,
                constraint,
            } => write!(f, "parameter `{name}` = {value} violates {constraint}"),
            Error::Truncation {
                achieved_tail,
                hard_cap,
            } => write!(
                f,
                "truncation cap {hard_cap} reached before tail-mass target; achieved tail {achieved_tail:.3e}"
            ),
            Error::ThinningSizeGuard { n_max, limit } => write!(
                f,
                "exact thinning limited to N_max <= {limit}, got {n_max}; use moments or sampling"
            ),
            Error::OracleResolution { lost_mass, dim } => write!(
                f,
                "oracle dimension {dim} too small: {lost_mass:.3e} probability lost past cutoff"
            ),
            Error::Regime { what } => write!(f, "outside supported regime: {what}"),
            Error::DegenerateFit { what } => write!(f, "degenerate fit: {what}"),
            Error::FitDidNotConverge { best_cost } => {
                write!(f, "fit did not converge; best cost {best_cost:.6e}")
            }
            Error::AllInconclusive => write!(f, "all trials inconclusive at this threshold"),
            Error::WorkerPanic { worker } => write!(f, "Monte Carlo worker {worker} panicked"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
