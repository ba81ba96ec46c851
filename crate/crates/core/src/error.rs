use thiserror::Error;

/// Errors produced by the solver library and the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected_rows}x{expected_cols}, got {actual_rows}x{actual_cols}")]
    DimensionMismatch { expected_rows: usize, expected_cols: usize, actual_rows: usize, actual_cols: usize },

    #[error("sample index {index} out of range for {n} samples")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("SVD did not converge after {sweeps} sweeps (off-diagonal ratio {off_diagonal:e})")]
    SvdNoConvergence { sweeps: usize, off_diagonal: f64 },

    #[error("eigenvalue iteration did not converge after {iterations} iterations (relative residual {residual:e})")]
    EigenNoConvergence { iterations: usize, residual: f64 },

    #[error("reference solver did not converge after {iterations} iterations (final residual {residual:e})")]
    ReferenceNoConvergence { iterations: usize, residual: f64 },

    #[error("staleness {observed} exceeds cap {cap} at iteration {iteration}")]
    StalenessViolation { observed: usize, cap: usize, iteration: usize },

    #[error("iterate diverged at stage {stage}, iteration {iteration}")]
    Divergence { stage: usize, iteration: usize },

    #[error("rate formula inapplicable at these parameters: {0}")]
    RateInapplicable(String),

    #[error("trace incomplete for stage {stage}: missing iterations {missing:?}")]
    MissingEvents { stage: usize, missing: Vec<usize> },

    #[error("{0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
