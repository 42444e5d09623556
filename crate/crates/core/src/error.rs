use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("FASTA parse error at line {line}: {message}")]
    Fasta { line: usize, message: String },

    #[error("FASTQ parse error at byte {offset}: {message}")]
    Fastq { offset: u64, message: String },

    #[error("SAM parse error at line {line}: {message}")]
    Sam { line: usize, message: String },

    #[error("position {pos} out of range for genome of length {len}")]
    OutOfRange { pos: u64, len: u64 },

    #[error("invalid base {0:?}")]
    InvalidBase(char),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("genome checksum mismatch between index and reference")]
    ChecksumMismatch,

    #[error("index file is not valid: {0}")]
    BadIndex(String),

    #[error("index file is truncated")]
    Truncated,
}

impl Error {
    /// Process exit status for the command-line driver: 2 for I/O failures,
    /// 3 for format and validation failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) => 2,
            _ => 3,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
