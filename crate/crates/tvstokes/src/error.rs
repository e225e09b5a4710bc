use thiserror::Error;

/// Library error type. Variants map onto the CLI exit codes:
/// format errors exit with 3, numerical divergence with 4.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, got {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("rectangle {rect} out of bounds for {rows}x{cols} grid")]
    RectOutOfBounds {
        rect: String,
        rows: usize,
        cols: usize,
    },

    #[error("degenerate rectangle: {0}")]
    DegenerateRect(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("infeasible subdomain layout: {0}")]
    Layout(String),

    #[error("invalid tiling: {0}")]
    Tiling(String),

    #[error("numerical divergence at iteration {iteration}")]
    NumericalDivergence { iteration: usize },

    #[error("tangent field is not divergence-free (residual {residual:.3e} > {tolerance:.3e})")]
    InconsistentField { residual: f64, tolerance: f64 },

    #[error("unsupported image format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
