use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid channel: {}", .0.join("; "))]
    InvalidChannel(Vec<String>),

    #[error("symbol {symbol} at position {position} exceeds alphabet bound {bound}")]
    SymbolOutOfRange {
        position: usize,
        symbol: u32,
        bound: u32,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is singular or near-singular")]
    Singular,

    #[error("matrix is rank deficient")]
    RankDeficient,

    #[error("eigenvalue iteration did not converge within {0} iterations")]
    NoConvergence(usize),

    #[error("value is not on the expected grid: {0}")]
    OffGrid(String),

    #[error("empty codeword")]
    EmptyCodeword,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
