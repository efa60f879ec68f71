use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("graph must have at least one agent")]
    EmptyGraph,
    #[error("edge references unknown agent {index} (valid agents are 1..={n})")]
    UnknownAgent { index: usize, n: usize },
    #[error("weight a[{i}][{j}] = {weight} is negative or not finite")]
    NegativeWeight { i: usize, j: usize, weight: f64 },
    #[error("weight matrix is not symmetric at ({i}, {j})")]
    AsymmetricWeights { i: usize, j: usize },
    #[error("edge ({i}, {j}) is listed but has zero weight")]
    WeightEdgeMismatch { i: usize, j: usize },
    #[error("{context}: expected dimension {expected}, found {found}")]
    DimensionMismatch { context: &'static str, expected: usize, found: usize },
    #[error("invalid convex set: {0}")]
    InvalidSet(String),
    #[error("invalid objective: {0}")]
    InvalidObjective(String),
    #[error("point is not in the set (violation {violation:e})")]
    NotInSet { violation: f64 },
    #[error("step size must be positive and finite, got {0}")]
    InvalidStepSize(f64),
    #[error("radius must be positive and finite, got {0}")]
    InvalidRadius(f64),
    #[error("max_iters must be at least 1")]
    InvalidIterationBudget,
    #[error("non-finite {what} at iteration {iteration}")]
    NonFinite { iteration: usize, what: &'static str },
    #[error("mixing matrix I - L has negative entry at ({i}, {j}); use Metropolis weights")]
    NegativeMixing { i: usize, j: usize },
    #[error("{0} requires unconstrained (whole-space) or box sets")]
    UnsupportedConstraint(&'static str),
    #[error("initial iterate already equals the optimum; normalized error is undefined")]
    DegenerateNormalization,
    #[error("oracle solution is unavailable: {0}")]
    OracleUnavailable(String),
    #[error("the intersection of the local constraint sets appears to be empty")]
    InfeasibleIntersection,
    #[error("{what} did not converge within {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },
    #[error("could not generate a connected graph after {attempts} attempts")]
    Connectivity { attempts: usize },
    #[error("average degree {degree} must satisfy 0 < degree < n = {n}")]
    InvalidDegree { degree: f64, n: usize },
    #[error("scenario field `{field}`: {reason}")]
    Scenario { field: String, reason: String },
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Coarse error classes, used for CLI exit codes and FFI status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Input,
    Numerical,
    Oracle,
    Io,
}

impl Error {
    pub fn scenario(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Scenario { field: field.into(), reason: reason.into() }
    }

    pub fn category(&self) -> ErrorCategory {
        use Error::*;
        match self {
            NonFinite { .. } | NegativeMixing { .. } | NoConvergence { .. } | DegenerateNormalization => {
                ErrorCategory::Numerical
            }
            OracleUnavailable(_) | InfeasibleIntersection => ErrorCategory::Oracle,
            Io(_) => ErrorCategory::Io,
            _ => ErrorCategory::Input,
        }
    }
}
