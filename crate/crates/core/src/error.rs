use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A vector or scalar argument lies outside the domain of the operation.
    #[error("rejected input: {0}")]
    Domain(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    /// A combination of settings that the solver does not support.
    #[error("configuration error: {0}")]
    Config(String),
    /// A required schedule or problem parameter was not supplied.
    #[error("missing parameter `{0}`")]
    MissingParam(&'static str),
    /// A delay sequence broke `0 <= d(k) <= k` or the delay bound.
    #[error("invalid delay at k={k}: d(k)={d}")]
    Delay { k: u64, d: u64 },
    #[error("empty dataset")]
    EmptyDataset,
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
