use thiserror::Error;

/// Errors raised by oracles, algorithms and verification routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("element id {id} is outside the ground set of size {n}")]
    ElementOutOfRange { id: usize, n: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// An instance exceeds the limits of an exhaustive routine.
    #[error("refusing exhaustive computation: {0}")]
    Refused(String),

    /// A structural contract (down-closedness, algorithm invariant) was violated.
    #[error("contract violation: {0}")]
    Contract(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_ids(set: &[usize], n: usize) -> Result<()> {
    match set.iter().find(|&&id| id >= n) {
        Some(&id) => Err(Error::ElementOutOfRange { id, n }),
        None => Ok(()),
    }
}
