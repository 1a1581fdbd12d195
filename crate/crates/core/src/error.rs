use thiserror::Error;

/// Broad failure category, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad configuration or arguments.
    Config,
    /// Unreadable, malformed or schema-violating input.
    Data,
    /// Numerical degeneracy during fitting or scoring.
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("structural error: {0}")]
    Structure(String),

    #[error("parse error at row {row}, column '{column}': cannot read '{token}' as a finite real")]
    Parse {
        row: usize,
        column: String,
        token: String,
    },

    #[error("schema violation: {0}")]
    Schema(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("attribute '{0}' has no observed values")]
    DegenerateAttribute(String),

    #[error("invalid label: {0}")]
    InvalidLabel(String),

    #[error("score undefined: {0}")]
    UndefinedScore(String),

    #[error("cluster {cluster} has zero total weight")]
    EmptyCluster { cluster: usize },

    #[error("model format error: {0}")]
    Model(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::DegenerateAttribute(_)
            | Error::UndefinedScore(_)
            | Error::EmptyCluster { .. } => ErrorKind::Numeric,
            _ => ErrorKind::Data,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
