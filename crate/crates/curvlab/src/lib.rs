//! Numerical certificates for curvature and modified log-Sobolev inequalities of
//! finite-dimensional symmetric quantum Markov semigroups, plus closed-form CLSI
//! constants for several operator-algebraic families (Fourier multipliers with
//! growth conditions, free orthogonal and quantum automorphism heat semigroups,
//! quantum tori).
//!
//! The crate is organized around a small stack:
//!
//! * [`linalg`] — dense complex Hermitian linear algebra and functional calculus;
//! * [`algebra`] — finite von Neumann algebras as direct sums of matrix blocks
//!   with a normalized trace, states, and conditional expectations;
//! * [`semigroup`] — symmetric Markov generators, evolution, Choi operators and
//!   CB-return times;
//! * [`entropy_curvature`] — entropy functionals, Fisher information, Γ/Γ₂ forms,
//!   Bakry–Émery certificates, MLSI ratio searches and gradient estimates;
//! * [`models`] — concrete constructions: Clifford algebras with the word-length
//!   derivation, depolarizing semigroups, finite-group Fourier multipliers,
//!   q-deformed Gram matrices;
//! * [`constants`] — analytic CLSI/CB-return-time calculators driven by Chebyshev
//!   spectral data and growth descriptors.
//!
//! All sampling is deterministic given an explicit seed. Batch loops run on a
//! rayon pool when the `parallel` feature (default) is enabled and fall back to
//! sequential iteration otherwise; results are identical either way.

pub mod algebra;
pub mod constants;
pub mod entropy_curvature;
pub mod error;
pub mod linalg;
pub mod models;
pub mod parallel;
pub mod semigroup;
pub mod tol;

pub use error::{Error, Result};
pub use tol::Tolerances;
