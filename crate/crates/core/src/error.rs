use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid Q-format: {0}")]
    InvalidFormat(String),

    #[error("invalid alphabet set: {0}")]
    InvalidAlphabetSet(String),

    /// A weight group reached an ASM/MAN datapath that cannot produce it.
    #[error(
        "group value {value} is not supported by alphabets {alphabets} in a {group_bits}-bit group"
    )]
    UnsupportedGroupValue {
        value: u32,
        group_bits: u32,
        alphabets: String,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },

    #[error("quality gate unreachable: best accuracy {best:.4} < required {required:.4}")]
    QualityUnreachable { best: f64, required: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("{path}: bad magic number 0x{found:08x}, expected 0x{expected:08x}")]
    BadMagic {
        path: PathBuf,
        expected: u32,
        found: u32,
    },

    #[error("{path}: truncated file ({detail})")]
    Truncated { path: PathBuf, detail: String },

    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    /// True for errors caused by input data rather than configuration.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::EmptyDataset
                | Error::BadMagic { .. }
                | Error::Truncated { .. }
                | Error::CountMismatch { .. }
                | Error::Io(_)
                | Error::DimensionMismatch { .. }
        )
    }
}
