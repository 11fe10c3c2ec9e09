use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the D-IRA library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("ring exponent m={0} is out of range (supported: 1..=8)")]
    InvalidExponent(u32),

    #[error("element {value} is not in Z_{q}")]
    ElementOutOfRange { value: usize, q: usize },

    #[error("operation is undefined for the zero element")]
    ZeroElement,

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("malformed file {path}: {reason}")]
    Malformed { path: PathBuf, reason: String },

    #[error("unknown bundled profile {0:?}")]
    UnknownProfile(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error(
        "interleaver infeasible: {zero_divisor_edges} zero-divisor edges but only {capacity} \
         admissible sockets on variable nodes of degree > 3"
    )]
    InfeasibleInterleaver {
        zero_divisor_edges: usize,
        capacity: usize,
    },

    #[error("generator matrix refused: n={n} exceeds the bound {bound}")]
    TooLarge { n: usize, bound: usize },

    #[error("enumeration bound exceeded: {0}")]
    EnumerationBound(String),

    #[error("coefficient matrix is not invertible over Z_{q}: det mod q = {det}")]
    SingularMatrix { det: usize, q: usize },

    #[error("linear program infeasible: {0}")]
    Infeasible(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
