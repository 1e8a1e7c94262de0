use std::path::PathBuf;

use thiserror::Error;

use crate::schema::BpeGroup;

pub type Result<T> = std::result::Result<T, Error>;

/// All error conditions surfaced by the pipeline.
///
/// Every variant carries enough context (path, row index, byte offset) to
/// point at the offending input. [`Error::exit_code`] maps variants to the
/// stable process exit codes documented in the README.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    SchemaParse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid schema: {message}")]
    SchemaValidation { message: String },

    #[error("{path}: row {row}: {message}")]
    CsvDialect {
        path: PathBuf,
        row: u64,
        message: String,
    },

    #[error("{path}: header {found:?} does not match first file's header {expected:?}")]
    HeaderMismatch {
        path: PathBuf,
        expected: Vec<String>,
        found: Vec<String>,
    },

    #[error("{path}: required column {column:?} not present in header")]
    MissingColumn { path: PathBuf, column: String },

    #[error("row {row}: cannot parse timestamp {value:?} with format {format:?}")]
    TimestampParse {
        row: u64,
        value: String,
        format: String,
    },

    #[error("row {row}, column {column:?}: value {value:?} is not an integer")]
    IntegerCoercion {
        row: u64,
        column: String,
        value: String,
    },

    #[error("row {row}: timestamp precedes the previous row; input is not sorted")]
    NegativeDelta { row: u64 },

    #[error("BPE group {group} is already trained")]
    GroupAlreadyTrained { group: BpeGroup },

    #[error("BPE group {group} is not trained")]
    GroupNotTrained { group: BpeGroup },

    #[error("BPE group {group}: value {value:?} contains {ch:?}, which is reserved for fixed tokens")]
    ForbiddenAlphabetChar {
        group: BpeGroup,
        ch: char,
        value: String,
    },

    #[error("column {column:?}: value {value:?} is not in the declared category set")]
    UnknownCategory { column: String, value: String },

    #[error("value {value:?}: character at byte {byte_offset} is not in the vocabulary")]
    UnknownCharacter { value: String, byte_offset: usize },

    #[error("malformed token stream at offset {offset}: {message}")]
    MalformedStream { offset: u64, message: String },

    #[error("{path}: {message}")]
    FormatVersion { path: PathBuf, message: String },

    #[error("{path}: checksum mismatch: {message}")]
    Checksum { path: PathBuf, message: String },

    #[error("{path}: truncated: expected {expected_bytes} bytes, found {found_bytes}")]
    Truncation {
        path: PathBuf,
        expected_bytes: u64,
        found_bytes: u64,
    },

    #[error("row {row}: {source}")]
    EncodeRow {
        row: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn schema(message: impl Into<String>) -> Self {
        Error::SchemaValidation {
            message: message.into(),
        }
    }

    /// Stable, documented exit code for CLI consumers.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 3,
            Error::CsvDialect { .. } => 4,
            Error::HeaderMismatch { .. } | Error::MissingColumn { .. } => 5,
            Error::TimestampParse { .. } => 6,
            Error::IntegerCoercion { .. } | Error::NegativeDelta { .. } => 7,
            Error::SchemaParse { .. } => 8,
            Error::SchemaValidation { .. } | Error::ForbiddenAlphabetChar { .. } => 9,
            Error::GroupAlreadyTrained { .. } | Error::GroupNotTrained { .. } => 10,
            Error::UnknownCategory { .. } => 11,
            Error::UnknownCharacter { .. } => 12,
            Error::MalformedStream { .. } => 13,
            Error::FormatVersion { .. } => 14,
            Error::Checksum { .. } => 15,
            Error::Truncation { .. } => 16,
            Error::EncodeRow { source, .. } => source.exit_code(),
        }
    }
}
