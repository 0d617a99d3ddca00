use std::path::PathBuf;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("row index {index} out of range for {len} rows")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("class {class} has {count} samples, at least {needed} required")]
    TooFewSamples { class: usize, count: usize, needed: usize },

    #[error("class {0} has no samples")]
    EmptyClass(usize),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("label {label} out of range for {num_classes} classes")]
    LabelOutOfRange { label: usize, num_classes: usize },

    #[error("empty confusion matrix")]
    EmptyConfusion,

    #[error("class {0} is absent from the true labels, recall is undefined")]
    AbsentClass(usize),

    #[error("class {0} has zero row and column sums, CBA is undefined")]
    UndefinedClassBalance(usize),

    #[error("NaN score at cell {cell}, method {method}")]
    NanScore { cell: usize, method: usize },

    #[error("non-finite gradient in {location} at index {index}: {value}")]
    NonFiniteGradient { location: String, index: usize, value: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid network file: {0}")]
    NetworkFormat(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("incomplete results: {0}")]
    IncompleteResults(String),

    #[error("{0}")]
    Sampling(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True when the error stems from a bad configuration rather than bad data.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
