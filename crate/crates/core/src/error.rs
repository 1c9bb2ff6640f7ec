use std::io;

use thiserror::Error;

/// Errors raised by the quantization library.
#[derive(Debug, Error)]
pub enum RvqError {
    /// A caller-supplied argument violates an operation's precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A codebook or code file is malformed.
    #[error("format error in `{field}`: {message}")]
    Format {
        field: &'static str,
        message: String,
    },

    /// The exhaustive search would enumerate more combinations than allowed.
    #[error("exhaustive search needs {required} combinations, guard is {guard}")]
    Capacity { required: u128, guard: u128 },

    /// Error attached to one element of a batch or one frame of a signal.
    #[error("item {index}: {source}")]
    Item {
        index: usize,
        #[source]
        source: Box<RvqError>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl RvqError {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        RvqError::Argument(msg.into())
    }

    pub(crate) fn format(field: &'static str, msg: impl Into<String>) -> Self {
        RvqError::Format {
            field,
            message: msg.into(),
        }
    }

    pub(crate) fn at(index: usize, source: RvqError) -> Self {
        RvqError::Item {
            index,
            source: Box::new(source),
        }
    }
}

pub type Result<T> = std::result::Result<T, RvqError>;
