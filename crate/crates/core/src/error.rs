use thiserror::Error;

use crate::lattice::Momentum;

/// Errors produced by the spectral toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate cutoff: the scheme has empty support")]
    DegenerateCutoff,

    #[error("tail not summable: {0}")]
    TailNotSummable(String),

    #[error("requested error bound {requested:e} unachievable below radius cap {radius_cap}; best bound {best_bound:e}")]
    ToleranceUnachievable {
        requested: f64,
        best_bound: f64,
        radius_cap: f64,
    },

    #[error("resolvent pole: z = {0} lies on the spectrum of H0")]
    ResolventPole(String),

    #[error("z = {0} is an eigenvalue of H (singular Birman-Schwinger operator)")]
    SingularPhi(String),

    #[error("energy {energy} is outside the variational window (must be below {bound})")]
    OutsideVariationalWindow { energy: f64, bound: f64 },

    #[error("outside analytic continuation window: nonpositive denominator at k = {k:?}")]
    OutsideContinuationWindow { k: Momentum },

    #[error("z = {0} is not an eigenvalue of H")]
    NotAnEigenvalue(f64),

    #[error("sector dimension {dimension} exceeds the configured cap {cap}")]
    DimensionCap { dimension: usize, cap: usize },

    #[error("operator is not Hermitian (max asymmetry {0:e})")]
    NotHermitian(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("eigensolver did not converge: {0}")]
    NoConvergence(String),

    #[error("polaron equation undefined: G vanishes at q = {q:?}")]
    PolaronEquationUndefined { q: Momentum },

    #[error("bracket failure: {0}")]
    BracketFailure(String),

    #[error("stationarity degenerate at E = {0}")]
    StationarityDegenerate(f64),

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
