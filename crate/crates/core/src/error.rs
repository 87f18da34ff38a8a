use thiserror::Error;

/// Errors produced by the core library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: event at ({x}, {y}) lies outside the {width}x{height} sensor")]
    OutOfRange {
        line: usize,
        x: u64,
        y: u64,
        width: u32,
        height: u32,
    },

    #[error("event batch is empty")]
    EmptyBatch,

    #[error("events are not sorted by timestamp (index {index}: {previous} > {current})")]
    Unsorted {
        index: usize,
        previous: u64,
        current: u64,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("optimization diverged at iteration {iteration}")]
    Diverged { iteration: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
