use thiserror::Error;

/// Errors raised while validating, designing, or evaluating noise densities.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid support: {0}")]
    InvalidSupport(String),

    #[error("invalid quality budget: {0}")]
    InvalidBudget(String),

    #[error("invalid quality function: {0}")]
    InvalidQualityFn(String),

    #[error("invalid truncation policy: {0}")]
    InvalidTruncation(String),

    #[error("grid too coarse: {n_points} interior nodes (minimum {min})")]
    GridTooCoarse { n_points: usize, min: usize },

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("automatic truncation did not settle after {doublings} doublings (last half-width {half_width})")]
    NonConvergentTruncation { doublings: usize, half_width: f64 },

    #[error("degenerate density: {0}")]
    DegenerateDensity(String),

    #[error("value {0} outside [0, 1]")]
    OutOfRange(f64),

    #[error("grid half-width {half_width} is smaller than the required {required}")]
    DomainTooSmall { half_width: f64, required: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("state index {index} outside 1..={len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error(
        "quality budget {rho} is below the smallest quality reachable on this grid ({reachable})"
    )]
    BudgetUnreachable { rho: f64, reachable: f64 },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("at rho = {rho}: {source}")]
    AtBudget {
        rho: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Stable machine-readable identifier.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidSupport(_) => "invalid_support",
            Error::InvalidBudget(_) => "invalid_budget",
            Error::InvalidQualityFn(_) => "invalid_quality_fn",
            Error::InvalidTruncation(_) => "invalid_truncation",
            Error::GridTooCoarse { .. } => "grid_too_coarse",
            Error::InvalidQuery(_) => "invalid_query",
            Error::NonConvergentTruncation { .. } => "non_convergent_truncation",
            Error::DegenerateDensity(_) => "degenerate_density",
            Error::OutOfRange(_) => "out_of_range",
            Error::DomainTooSmall { .. } => "domain_too_small",
            Error::GridMismatch(_) => "grid_mismatch",
            Error::NoConvergence { .. } => "no_convergence",
            Error::IndexOutOfRange { .. } => "index_out_of_range",
            Error::BudgetUnreachable { .. } => "budget_unreachable",
            Error::NotApplicable(_) => "not_applicable",
            Error::AtBudget { source, .. } => source.code(),
        }
    }

    /// True when the error stems from malformed input rather than a failed computation.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::InvalidSupport(_)
            | Error::InvalidBudget(_)
            | Error::InvalidQualityFn(_)
            | Error::InvalidTruncation(_)
            | Error::GridTooCoarse { .. }
            | Error::InvalidQuery(_)
            | Error::OutOfRange(_) => true,
            Error::AtBudget { source, .. } => source.is_input_error(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
