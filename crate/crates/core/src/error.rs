use thiserror::Error;

/// Errors produced by the sparse PCA library.
#[derive(Debug, Error)]
pub enum SpcaError {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("matrix is identically zero; the step size 1/||X||_2^2 is undefined")]
    ZeroMatrix,

    #[error("{routine} did not converge on a {rows}x{cols} matrix")]
    Convergence {
        routine: &'static str,
        rows: usize,
        cols: usize,
    },

    #[error("non-finite value encountered at iteration {iteration}")]
    NonFinite { iteration: usize },

    #[error("parse error at row {row}, column {col}: {message}")]
    Parse {
        row: usize,
        col: usize,
        message: String,
    },

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl SpcaError {
    /// True for failures of the numerical core, as opposed to bad input or configuration.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            SpcaError::Convergence { .. } | SpcaError::NonFinite { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, SpcaError>;
