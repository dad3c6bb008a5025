use thiserror::Error;

/// Errors produced by the stability engine.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("profile file parse error: {0}")]
    ProfileParse(String),

    #[error("profile validation error: {0}")]
    ProfileValidation(String),

    #[error("spectral parameter {lambda} lies in or too close to the essential spectrum (right edge {edge})")]
    InsideEssentialSpectrum { lambda: f64, edge: f64 },

    #[error("degenerate asymptotic matrix at lambda = {lambda}: {detail}")]
    DegenerateAsymptotics { lambda: f64, detail: String },

    #[error("integration failure at x = {x}: {detail}")]
    Integration { x: f64, detail: String },

    #[error("crossing-form series did not close by order {max_order} (dim {dim}, accounted {accounted})")]
    SeriesNonconvergence {
        max_order: usize,
        dim: usize,
        accounted: usize,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("linear solver failure: {0}")]
    Solver(String),

    #[error("solve residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    SolveAccuracy { residual: f64, tol: f64 },

    #[error("Fredholm solvability violated: |<rhs, kernel>| = {overlap:.3e}")]
    FredholmViolation { overlap: f64 },

    #[error("degenerate corner data: |I1| = {i1_abs:.3e}, |I2| = {i2_abs:.3e} not both above {tol:.3e}; an extra calculation would be needed")]
    DegenerateCorrection { i1_abs: f64, i2_abs: f64, tol: f64 },

    #[error("computation inconsistency: {0}")]
    Inconsistency(String),

    #[error("lambda sweep could not isolate crossings near {lambda} even at minimum grid step")]
    SweepUnresolved { lambda: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
