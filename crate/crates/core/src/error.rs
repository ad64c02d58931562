use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invalid deformation: sup |grad tau| = {0:.4} (must be < 1)")]
    InvalidDeformation(f64),

    #[error("grid cannot resolve the filter bank: {0}")]
    Resolution(String),

    #[error("degenerate frame: epsilon = {0:.4}")]
    DegenerateFrame(f64),

    #[error("non-finite value produced along path {0}")]
    NumericOverflow(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("configuration mismatch: {0}")]
    Config(String),

    #[error("format error at byte {offset}: {msg}")]
    Format { offset: u64, msg: String },

    #[error("checksum mismatch in section {0}")]
    Checksum(String),

    #[error("unsupported container version {found} (expected {expected})")]
    Version { found: u16, expected: u16 },

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn format(offset: u64, msg: impl Into<String>) -> Self {
        Error::Format {
            offset,
            msg: msg.into(),
        }
    }
}
