use thiserror::Error;

/// Errors raised across the reconstruction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    ShapeMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("basis numerically dependent at function {index}: Gram-Schmidt pivot {pivot:.3e} below {threshold:.1e}")]
    Conditioning {
        index: usize,
        pivot: f64,
        threshold: f64,
    },

    #[error("singular factorization at column {column}")]
    Singular { column: usize },

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:.3e}, target {target:.1e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        target: f64,
    },

    #[error("forward solve failed at angle index {theta_index}: {source}")]
    AngleSolve {
        theta_index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error in {path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Wraps an error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// True for errors caused by numerical breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Conditioning { .. } | Error::Singular { .. } | Error::NonConvergence { .. } => true,
            Error::AngleSolve { source, .. } | Error::Stage { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
