//! Crate-wide error type.
//!
//! Errors are split into two broad kinds so the command-line driver can map
//! them onto exit codes: problems with user-supplied configuration or input
//! data (`is_validation() == true`, exit code 1) and unexpected runtime
//! failures such as I/O errors while writing outputs (exit code 2).

use thiserror::Error;

/// All errors produced by this crate.
#[derive(Debug, Error)]
pub enum SeglensError {
    /// Input file could not be read.
    #[error("cannot read {path}: {source}")]
    ReadInput {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Output file or directory could not be written.
    #[error("cannot write {path}: {source}")]
    WriteOutput {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// A user-supplied file has invalid content.
    #[error("invalid input in {path} (line {line}): {message}")]
    InvalidInput {
        path: String,
        line: usize,
        message: String,
    },

    /// Configuration is malformed or internally inconsistent.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Two data sets that must align (corpus, attributions, predictions,
    /// segment assignments) do not.
    #[error("data mismatch: {0}")]
    DataMismatch(String),

    /// A numeric operation has no defined result for the given input.
    #[error("undefined result: {0}")]
    Undefined(String),

    /// A token has no vector in the embedding table. Callers that can
    /// degrade gracefully (annotation, bias scans) match on this variant.
    #[error("out of vocabulary: {token:?}")]
    OutOfVocabulary { token: String },

    /// Unexpected internal failure.
    #[error("internal error: {0}")]
    Internal(String),
}

impl SeglensError {
    /// True when the error describes bad user input or configuration rather
    /// than an unexpected runtime failure.
    #[must_use]
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            SeglensError::WriteOutput { .. } | SeglensError::Internal(_)
        )
    }

    /// Short machine-readable tag for the error kind.
    #[must_use]
    pub fn kind(&self) -> &'static str {
        match self {
            SeglensError::ReadInput { .. } => "read-input",
            SeglensError::WriteOutput { .. } => "write-output",
            SeglensError::InvalidInput { .. } => "invalid-input",
            SeglensError::InvalidConfig(_) => "invalid-config",
            SeglensError::DataMismatch(_) => "data-mismatch",
            SeglensError::Undefined(_) => "undefined-result",
            SeglensError::OutOfVocabulary { .. } => "out-of-vocabulary",
            SeglensError::Internal(_) => "internal",
        }
    }
}
