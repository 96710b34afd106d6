use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or hyperparameter.
    #[error("configuration error: {0}")]
    Config(String),

    /// Requested sizes are incompatible with the data.
    #[error("size error: {0}")]
    Size(String),

    /// Dimension mismatch between inputs.
    #[error("shape error: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    /// Malformed input data at a specific row.
    #[error("data error at index {index}: {message}")]
    Data { index: usize, message: String },

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("explanation error: {0}")]
    Explanation(String),

    #[error("unknown feature `{name}`; valid names: {}", valid.join(", "))]
    UnknownFeature { name: String, valid: Vec<String> },

    #[error("unsupported format_version {found}; supported versions: {supported:?}")]
    Version { found: u64, supported: Vec<u64> },

    /// Schema or parse failure in an input file.
    #[error("{path}: {message}")]
    Format { path: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub(crate) fn format(path: impl AsRef<std::path::Path>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.as_ref().display().to_string(),
            message: message.into(),
        }
    }

    /// True for errors caused by bad user input rather than bad data.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}
