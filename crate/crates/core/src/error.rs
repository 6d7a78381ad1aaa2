use thiserror::Error;

/// Errors raised by the geometry primitives, verifiers and harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("geodesic integration failed at t = {t:.6e}: {reason}")]
    Integration { t: f64, reason: String },

    #[error("geodesic shooting failed after {attempts} attempts (last residual {residual:.3e})")]
    Bvp { attempts: usize, residual: f64 },

    #[error("point {point:?} lies outside the net coverage region")]
    Coverage { point: Vec<f64> },

    #[error("configuration error: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("simplex map evaluation failed on vertices {vertices:?}: {source}")]
    Evaluation {
        vertices: Vec<Vec<i64>>,
        #[source]
        source: Box<Error>,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("resolution budget exhausted: {0}")]
    Resolution(String),

    #[error("no regular value found after {0} direction draws")]
    Degeneracy(usize),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(vec![msg.into()])
    }
}
