use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("singular matrix: pivot {pivot:e} in column {column}")]
    Singular { column: usize, pivot: f64 },

    #[error("decomposition did not converge after {0} sweeps")]
    Decomposition(usize),

    #[error("point is not a fixed point: residual {0:e}")]
    NotFixedPoint(f64),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("subproblem for block {block} failed: {source}")]
    Subproblem {
        block: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    /// Short machine-readable tag, used by the CLI for one-line error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Shape(_) => "shape",
            Error::Parameter(_) => "parameter",
            Error::Singular { .. } => "singular",
            Error::Decomposition(_) => "decomposition",
            Error::NotFixedPoint(_) => "not-fixed-point",
            Error::Protocol(_) => "protocol",
            Error::Subproblem { .. } => "subproblem",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
