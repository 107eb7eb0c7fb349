use thiserror::Error;

/// Errors raised by the inference library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian (asymmetry {0:.3e})")]
    NotHermitian(f64),

    #[error("not a density matrix: {0}")]
    InvalidDensity(String),

    #[error("eigenvalue {0:.6e} lies outside the domain of the matrix function")]
    Domain(f64),

    #[error("direction grid has {got} directions, at least {min} required for k = {k}")]
    GridTooCoarse { k: usize, got: usize, min: usize },

    #[error("operation requires exactly two observables, got {0}")]
    NotPlanar(usize),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    ConvergenceFailure {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("exponent norm {norm:.3e} exceeds overflow guard {bound:.3e}")]
    OverflowGuard { norm: f64, bound: f64 },

    #[error("dual iterates diverged (|lambda| = {lambda_norm:.3e}); target is not an interior point")]
    NotInterior { lambda_norm: f64 },

    #[error("observables together with the identity are linearly dependent")]
    SingularHessian,

    #[error("expected value lies outside the body of attainable expected values (gap {gap:.3e})")]
    OutsideBody { gap: f64 },

    #[error("face projector has rank zero")]
    DegenerateFace,

    #[error("half-space neighborhood does not meet the state space")]
    EmptyNeighborhood,

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
