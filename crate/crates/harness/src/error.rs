use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// The file is not valid scenario syntax; `message` carries the line context.
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    /// Parsed, but a value is outside its allowed range.
    #[error("{context}: {source}")]
    Validation {
        context: String,
        #[source]
        source: recal_core::Error,
    },
    #[error("{0}")]
    Invalid(String),
    #[error("seed {seed}: {source}")]
    Run {
        seed: u64,
        #[source]
        source: recal_core::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl HarnessError {
    /// Whether the error comes from bad input rather than from running it.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            HarnessError::Parse { .. } | HarnessError::Validation { .. } | HarnessError::Invalid(_)
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
