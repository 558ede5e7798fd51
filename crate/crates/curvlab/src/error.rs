//! Error type shared across the crate.

use thiserror::Error;

/// Errors for algebra, semigroup and calculator operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("eigenvalue {value} outside domain of {func}")]
    FunctionDomain { func: &'static str, value: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("matrix not Hermitian (residual {0:.3e})")]
    NotHermitian(f64),

    #[error("generator not symmetric in L2 (residual {0:.3e})")]
    NotSymmetric(f64),

    #[error("generator not dissipative (min eigenvalue {0:.3e})")]
    NotDissipative(f64),

    #[error("generator does not annihilate the unit (residual {0:.3e})")]
    NotUnital(f64),

    #[error("span is not a subalgebra (closure residual {0:.3e})")]
    NotSubalgebra(f64),

    #[error("basis is not orthonormal (Gram residual {0:.3e})")]
    NotOrthonormal(f64),

    #[error("state is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPositive(f64),

    #[error("function ψ is not conditionally negative definite: {0}")]
    NotCnd(String),

    #[error("not a group table: {0}")]
    NotAGroup(String),

    #[error("internal consistency error: {0}")]
    Internal(String),

    #[error("eigendecomposition failed to converge")]
    EigFailed,

    #[error("overflow: {0}")]
    Overflow(String),

    #[error("bisection did not bracket a solution: {0}")]
    NoBracket(String),
}

pub type Result<T> = std::result::Result<T, Error>;
