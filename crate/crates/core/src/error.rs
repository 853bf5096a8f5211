use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("register size {0} out of range (1..={max})", max = crate::state::MAX_QUBITS)]
    QubitCount(usize),

    #[error("qubit label {label} invalid for a {n}-qubit register")]
    QubitLabel { label: usize, n: usize },

    #[error("bit list has length {got}, expected {expected}")]
    BitLength { got: usize, expected: usize },

    #[error("operator is not unitary (deviation {0:.3e})")]
    NonUnitary(f64),

    #[error("phase factor {0} does not have unit modulus")]
    NonUnitPhase(usize),

    #[error("two-qubit operation requires distinct qubits, got {0} twice")]
    SameQubit(usize),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("projection has zero probability; cannot renormalize")]
    ZeroProbability,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no retained shots")]
    NoRetainedShots,

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
