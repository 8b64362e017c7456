//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input file (FASTA, scheme config, substitution matrix).
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Invalid run configuration (partition size, worker count, shape).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Index, offset or wave outside the valid range.
    #[error("{what} out of bounds: {detail}")]
    OutOfBounds { what: &'static str, detail: String },

    /// A caller violated an operation's preconditions.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Scoring scheme cannot score a residue pair.
    #[error("scoring scheme error: {0}")]
    Scheme(String),

    /// Instance would allocate past the configured memory cap.
    #[error(
        "tensor of {cells} cells needs {required} bytes but the memory cap is {cap} bytes; \
         raise the cap or shrink the instance"
    )]
    MemoryCap { cells: u64, required: u64, cap: u64 },

    /// Instance too large for an exhaustive operation.
    #[error("instance too large: {0}")]
    TooLarge(String),

    /// A needed neighbour score was absent when a cell was computed.
    /// Indicates a protocol bug in the executor, not a user error.
    #[error(
        "dependency error: cell {cell} (flat {flat}) was not available; \
         expected from partition {source_partition} on worker {source_worker}"
    )]
    Dependency {
        cell: String,
        flat: u64,
        source_partition: String,
        source_worker: usize,
    },

    /// Two copies of the same cell disagreed after a parallel run.
    #[error("consistency error: {0}")]
    Consistency(String),

    /// A worker thread failed mid-run.
    #[error("worker {worker} failed at wave {wave} (partition {partition}): {message}")]
    Worker {
        worker: usize,
        wave: usize,
        partition: String,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
