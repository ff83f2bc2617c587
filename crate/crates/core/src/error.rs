use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input. `record` is the offending image id when it could be recovered.
    #[error("{path}:{line}: parse error{}: {message}", record_suffix(.record))]
    Parse {
        path: PathBuf,
        line: usize,
        record: Option<String>,
        message: String,
    },

    #[error("record {record}: {message}")]
    Validation { record: String, message: String },

    #[error("channel {channel}: image {image_id} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        channel: String,
        image_id: String,
        expected: usize,
        found: usize,
    },

    #[error("channel {channel}: unknown image id {image_id}")]
    UnknownImage { channel: String, image_id: String },

    #[error("channel {channel}: missing vectors for images {}", .image_ids.join(","))]
    MissingChannel { channel: String, image_ids: Vec<String> },

    #[error("face center undefined for an image without faces")]
    UndefinedCenter,

    #[error("degenerate training set: {0}")]
    DegenerateTraining(String),

    #[error("average precision undefined without positives")]
    UndefinedAp,

    #[error("class {class} has {count} images, fewer than {folds} folds")]
    ClassTooSmall { class: String, count: usize, folds: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unsupported format {found:?}, expected {expected:?}")]
    Format { expected: String, found: String },
}

fn record_suffix(record: &Option<String>) -> String {
    match record {
        Some(id) => format!(" in record {id}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn validation(record: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            record: record.into(),
            message: message.into(),
        }
    }
}
