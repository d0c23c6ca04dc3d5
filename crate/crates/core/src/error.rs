use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("node index {index} out of range for {n} nodes (line {line})")]
    NodeOutOfRange { index: usize, n: usize, line: usize },

    #[error("empty graph")]
    EmptyGraph,

    /// A parameter sits on the boundary where the counts demand a finite log.
    #[error("degenerate parameter: {0}")]
    Degenerate(String),

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error("eigensolver did not converge (worst residual {residual:.3e}, tolerance {tolerance:.3e})")]
    NoConvergence { residual: f64, tolerance: f64 },

    #[error("estimator failed at k = {k}: {source}")]
    AtK {
        k: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Errors raised by numerical routines rather than by malformed input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Degenerate(_) | Error::Domain(_) | Error::NoConvergence { .. } => true,
            Error::AtK { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    pub(crate) fn at_k(k: usize, source: Error) -> Error {
        Error::AtK {
            k,
            source: Box::new(source),
        }
    }
}
