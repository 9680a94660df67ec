//! Finite-section spectral approximation and spectral gap detection for
//! banded self-adjoint operators.
//!
//! The crate covers periodic discrete Schrödinger operators, periodic Jacobi
//! matrices, block Toeplitz-Laurent operators given by a Hermitian matrix
//! symbol, and explicit band operators. It is `no_std` and only needs `alloc`;
//! file formats, the command line and thread pools live in the `specgap`
//! companion crate.
//!
//! Module map:
//!
//! - [`model`]: operator, symbol and family descriptions and their finite
//!   sections `A_n = P_n A P_n`.
//! - [`eigen`]: dense Hermitian Jacobi eigensolver, banded reduction for large
//!   sections, singular values and spectral weights.
//! - [`truncation`]: eigenvalue trajectories over growing `n`, bound
//!   estimates, window counts, point classification, in-gap eigenvalues.
//! - [`gap`]: the weighted-average gap criterion and its weight schemes.
//! - [`symbol`]: band intervals from matrix symbols, Borg diagnostics and
//!   perturbation-bound gap certificates.
//! - [`family`]: one-parameter polynomial families, sweeps and gap
//!   stability radii.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod eigen;
mod error;
pub mod family;
pub mod gap;
pub mod interval;
pub mod model;
pub mod symbol;
pub mod truncation;

pub use error::{Error, Result};
pub use num_complex::Complex64;
