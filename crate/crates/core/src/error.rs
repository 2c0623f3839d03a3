use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("outside the analyticity domain: {0}")]
    Domain(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("invalid state: {0}")]
    State(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("history depth {have} is insufficient, at least {required} is required")]
    DepthInsufficient { have: usize, required: usize },

    #[error("horizon {have} cannot reach tail tolerance {tol:e}, horizon {required} is required")]
    HorizonTooSmall { have: usize, required: usize, tol: f64 },

    #[error("validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("{module}: {source}")]
    InModule {
        module: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Attaches the name of the module that raised the error.
    pub fn in_module(self, module: &'static str) -> Self {
        match self {
            e @ Error::InModule { .. } => e,
            e => Error::InModule { module, source: Box::new(e) },
        }
    }

    /// True for errors caused by the input rather than by the computation.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Validation(_))
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}
