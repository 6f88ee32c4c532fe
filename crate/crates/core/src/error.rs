use thiserror::Error;

/// Errors raised by the chargelab library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("integer overflow: {0}")]
    Overflow(String),
    #[error("operator is not block-diagonal: off-sector entry of magnitude {magnitude:e} at ({row}, {col})")]
    NotBlockDiagonal { row: usize, col: usize, magnitude: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("singular dimension: {0}")]
    SingularDimension(String),
    #[error("degenerate sector: {0}")]
    DegenerateSector(String),
    #[error("no data: {0}")]
    NoData(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
