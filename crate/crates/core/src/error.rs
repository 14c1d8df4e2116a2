use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised anywhere in the core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension error in {op}: shapes {shapes:?}")]
    Dimension { op: &'static str, shapes: Vec<Vec<usize>> },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },

    #[error("finite-difference probe hit a non-finite value at coordinate {coordinate}")]
    Probe { coordinate: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("lifecycle error: {0}")]
    Lifecycle(&'static str),

    #[error("numerical error: {0}")]
    Numerical(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}
