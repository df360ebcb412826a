//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum Error {
    /// Two field elements from different prime fields were combined.
    #[error("modulus mismatch: {0} vs {1}")]
    ModulusMismatch(u64, u64),

    /// The requested modulus is not a prime.
    #[error("q must be prime (got {0})")]
    NotPrime(u64),

    /// A scheme parameter violates its bound. The message names the bound.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// Demand index outside `[1:E]`.
    #[error("demand index {j} out of range: valid windows are 1..={e}")]
    InvalidDemandIndex { j: usize, e: usize },

    /// An operation specific to one demand-size regime was called in the other.
    #[error("operation requires the {expected} regime (parameters are {actual})")]
    WrongRegime {
        expected: &'static str,
        actual: &'static str,
    },

    /// A sequence that should be a permutation of `[1:E]` is not.
    #[error("malformed permutation: {0}")]
    MalformedPermutation(String),

    /// Internal counting mismatch while building a query plan.
    #[error("plan construction failed at support {support}: {reason}")]
    Construction { support: String, reason: String },

    /// A subpacket index fell outside the store.
    #[error("subpacket index out of range: message {message} index {index} (L = {l})")]
    IndexOutOfRange {
        message: usize,
        index: usize,
        l: usize,
    },

    /// A demand-bearing sum has no resolvable side-information link.
    #[error("decoding failed: {0}")]
    Decode(String),

    /// Store dimensions do not match the plan being answered.
    #[error("store/plan mismatch: {0}")]
    StoreMismatch(String),

    /// An empty or inverted sweep range.
    #[error("empty range: {0}")]
    EmptyRange(String),
}

pub type Result<T> = std::result::Result<T, Error>;
