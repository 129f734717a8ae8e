use thiserror::Error;

/// Errors raised by the modelling pipeline.
#[derive(Debug, Error)]
pub enum QuinnError {
    /// An argument violated a documented precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// Array dimensions do not agree.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Input data could not be used (NaN cells, constant columns, ...).
    #[error("invalid data: {0}")]
    Data(String),

    /// A gradient or density evaluation produced a non-finite value.
    #[error("non-finite value in parameter block `{block}`")]
    NonFinite { block: &'static str },

    /// The sampler could not find a usable step size.
    #[error("sampler failure: {0}")]
    Sampler(String),

    /// A chain failed while running several in parallel.
    #[error("chain {index} failed: {source}")]
    Chain {
        index: usize,
        #[source]
        source: Box<QuinnError>,
    },

    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {message}")]
    Format { path: String, message: String },
}

impl QuinnError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        QuinnError::Domain(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        QuinnError::Shape(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        QuinnError::Data(msg.into())
    }

    /// True when the error stems from user input rather than a numerical failure.
    pub fn is_user_error(&self) -> bool {
        match self {
            QuinnError::Domain(_)
            | QuinnError::Shape(_)
            | QuinnError::Data(_)
            | QuinnError::Io { .. }
            | QuinnError::Format { .. } => true,
            QuinnError::Chain { source, .. } => source.is_user_error(),
            QuinnError::NonFinite { .. } | QuinnError::Sampler(_) => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, QuinnError>;
