use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("vertex index {index} out of range for complex with {num_vertices} vertices")]
    VertexOutOfRange { index: usize, num_vertices: usize },

    #[error("simplex {0:?} repeats a vertex")]
    DegenerateSimplex(Vec<usize>),

    #[error("simplex index {index} out of range in dimension {dim} ({count} simplices)")]
    SimplexOutOfRange { dim: usize, index: usize, count: usize },

    #[error("complex has no simplices of dimension {0}")]
    MissingDimension(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },

    #[error("missing required file {0}")]
    MissingFile(PathBuf),

    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),

    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Errors caused by bad user input rather than a failure while running.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::MissingFile(_)
                | Error::InvalidArgument(_)
                | Error::Checkpoint(_)
                | Error::Json(_)
                | Error::VertexOutOfRange { .. }
                | Error::DegenerateSimplex(_)
        )
    }
}
