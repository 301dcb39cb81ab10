//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid increment specification: {0}")]
    InvalidSpec(String),

    #[error("fractional order present; this operation requires integer orders")]
    FractionalOrder,

    #[error("singular evaluation at lambda = {lambda}: negative total order {order} at a zero")]
    SingularEvaluation { lambda: f64, order: f64 },

    #[error("series misaligned or incomplete: {0}")]
    Misaligned(String),

    #[error("insufficient history: need {needed} values, have {have}")]
    InsufficientHistory { needed: usize, have: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("quadrature did not converge: last change {last_change:.3e} after {refinements} refinements (suspected minimality violation or insufficient grid)")]
    QuadratureNotConverged { last_change: f64, refinements: u32 },

    #[error("spectral density singular or not positive definite at grid node {node}")]
    SingularDensity { node: usize },

    #[error("matrix is singular or not positive definite")]
    SingularMatrix,

    #[error("linear system ill-conditioned: estimated condition {cond:.3e} exceeds {limit:.3e}")]
    IllConditioned { cond: f64, limit: f64 },

    #[error("truncation too short: {0}")]
    TruncationTooShort(String),

    #[error("decay certificate required for an infinite-horizon functional")]
    MissingDecayCertificate,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("density class infeasible: {0}")]
    InfeasibleClass(String),

    #[error("least-favorable iteration did not converge: residual {residual:.3e} after {sweeps} sweeps")]
    LfNotConverged { residual: f64, sweeps: usize },

    #[error("missing multipliers for residual evaluation: {0}")]
    MissingMultipliers(String),

    #[error("unstable simulation parameters: {0}")]
    UnstableParameters(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
