//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument violates a precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An input lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A weight function produced a non-finite value at a grid point.
    #[error("non-finite weight value at grid point {point:?} (component {component})")]
    Evaluation { point: Vec<f64>, component: usize },

    /// A Gram matrix that must be inverted is numerically rank deficient.
    #[error(
        "rank-deficient Gram matrix: numerical rank {rank} of {dim}, \
         condition number {cond:.3e} exceeds limit {limit:.1e}"
    )]
    RankDeficient {
        rank: usize,
        dim: usize,
        cond: f64,
        limit: f64,
    },

    /// Data degenerate for the requested model operation (e.g. zero-variance axis).
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    /// Transform spectrum has coincident points; the closed form is unusable.
    #[error("degenerate spectrum: {0}; use the enumeration path instead")]
    DegenerateSpectrum(String),

    /// Exhaustive enumeration would exceed the subset budget. `required`
    /// saturates at u128::MAX when the subset count overflows even that.
    #[error("enumeration budget exceeded: {required} subsets > budget {budget}")]
    BudgetExceeded { required: u128, budget: u64 },

    /// Malformed input data (CSV and friends).
    #[error("parse error at line {line}: {detail}")]
    Parse { line: usize, detail: String },

    /// Internal numeric failure.
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code: 2 for usage/data errors, 3 for internal numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_)
            | Error::Domain(_)
            | Error::DegenerateSample(_)
            | Error::RankDeficient { .. }
            | Error::BudgetExceeded { .. }
            | Error::Parse { .. }
            | Error::Io(_) => 2,
            Error::Evaluation { .. } | Error::DegenerateSpectrum(_) | Error::Numeric(_) => 3,
        }
    }
}
