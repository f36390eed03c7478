use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the toolkit can report.
///
/// Variants group into three families that map onto CLI exit codes:
/// usage/config problems, data problems and external-service problems.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("write failed after {written} segments: {source}")]
    PartialWrite {
        written: usize,
        #[source]
        source: io::Error,
    },

    #[error("bitext is not line-aligned: source has {source_lines} lines, target has {target_lines}")]
    Alignment {
        source_lines: usize,
        target_lines: usize,
    },

    #[error("invalid UTF-8 in {path} at byte offset {offset}")]
    Decode { path: PathBuf, offset: u64 },

    #[error("{what}: need {required}, have {actual}")]
    Size {
        what: String,
        required: usize,
        actual: usize,
    },

    #[error("parse error in {location}: {message}")]
    Parse { location: String, message: String },

    #[error("character {ch:?} (U+{:04X}) is not covered by the subword model and byte fallback is disabled", *.ch as u32)]
    Coverage { ch: char },

    #[error("invalid byte-fallback sequence: {0}")]
    ByteDecode(String),

    #[error("archive format error: {0}")]
    Format(String),

    #[error("incompatible archives at tensor {tensor:?}: {message}")]
    Compatibility { tensor: String, message: String },

    #[error("invalid value: {0}")]
    Invalid(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("service error ({route}): {message}")]
    Service { route: String, message: String },

    #[error("protocol error ({route}): {message}")]
    Protocol { route: String, message: String },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }

    /// 1 = usage/config, 2 = data, 3 = external service.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Usage(_) | Error::Config(_) => 1,
            Error::Service { .. } | Error::Protocol { .. } => 3,
            _ => 2,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse {
            location: "JSON".into(),
            message: e.to_string(),
        }
    }
}
