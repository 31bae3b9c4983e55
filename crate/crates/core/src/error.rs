use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("diagonal pair ({0},{0}) not in antisymmetric space")]
    DiagonalPair(usize),

    #[error("orbital {orbital} out of range for {r} spin orbitals")]
    OrbitalOutOfRange { orbital: usize, r: usize },

    #[error("pair basis mismatch: {left} vs {right} spin orbitals")]
    BasisMismatch { left: usize, right: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not symmetric (max |M - M^T| = {0:e})")]
    NotSymmetric(f64),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-normalized 2-RDM: trace {trace}, expected {expected}")]
    NonNormalized { trace: f64, expected: f64 },

    #[error("determinant basis of size {size} exceeds the guard of {limit}")]
    BasisTooLarge { size: u128, limit: u128 },

    #[error("empty determinant sector (r = {r}, N = {n}, ms2 = {ms2})")]
    EmptySector { r: usize, n: usize, ms2: i32 },

    #[error("factor is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("numerical failure at iteration {iteration}: {message}")]
    Numerical { iteration: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
