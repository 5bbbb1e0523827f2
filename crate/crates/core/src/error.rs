use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the simulator and analysis routines.
#[derive(Error, Debug)]
pub enum Error {
    #[error("frame length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("non-binary value {value} at bit position {position}")]
    NonBinary { position: usize, value: u8 },
    #[error("zero distance on link {0}: path loss is singular")]
    SingularPathLoss(&'static str),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("interleaver is not a permutation of 0..{0}")]
    NotAPermutation(usize),
    #[error("unsupported constellation order {0}")]
    UnsupportedConstellation(usize),
    #[error("slot {slot} is not a {expected} slot for a {frames}-frame transmission")]
    InconsistentSlot {
        slot: usize,
        frames: usize,
        expected: &'static str,
    },
    #[error("missing detector output for slot {0}")]
    MissingSlot(usize),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("self-check failed: {0}")]
    SelfCheck(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("malformed CSV line {line}: {reason}")]
    Csv { line: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
