//! Library-wide error type.

/// Errors surfaced by mesh construction, assembly, solvers, and I/O.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Element family/order/dimension combination outside the supported set.
    #[error("unsupported element: {0}")]
    UnsupportedElement(String),

    /// A parameter violated a precondition (non-positive step size, bad mesh
    /// resolution, unknown enum literal, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Direct factorization hit a zero pivot / structurally singular matrix.
    #[error("singular system: {0}")]
    Singular(String),

    /// The iterative solver ran out of iterations.
    #[error("gmres did not converge: residual {residual:.3e} after {iterations} iterations (tolerance {tolerance:.3e})")]
    NoConvergence {
        residual: f64,
        iterations: usize,
        tolerance: f64,
    },

    /// A computed solution failed the relative-residual contract.
    #[error("solver residual contract violated: {residual:.3e} > {tolerance:.3e}")]
    ResidualContract { residual: f64, tolerance: f64 },

    /// Config file syntax or missing/unknown keys.
    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
