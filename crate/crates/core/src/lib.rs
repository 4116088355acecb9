//! Krylov iterative regularization for linear discrete ill-posed problems,
//! together with diagnostics that measure how well the k-dimensional Krylov
//! subspace generated by Lanczos bidiagonalization captures the dominant
//! right singular subspace of the operator.
//!
//! The crate is organised bottom-up:
//!
//! - [`problems`]: test problems (synthetic SVD-prescribed, `shaw`, `deriv2`)
//!   and reproducible white-noise injection.
//! - [`svdtools`]: dense SVD reference machinery (TSVD, Tikhonov, Picard data,
//!   transition index).
//! - [`bidiag`]: Lanczos bidiagonalization with reorthogonalization and Ritz
//!   values through a bidiagonal implicit-shift QR.
//! - [`solvers`]: LSQR, CGLS, CGME and LSMR iterate series, filter factors and
//!   semi-convergence detection.
//! - [`subspace`]: the sin-Θ distance between Krylov and singular subspaces,
//!   Lagrange factors, closed-form estimates and Ritz-value conditions.
//! - [`table`]: fixed-column CSV output shared by the experiment driver.

// `!(x > y)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bidiag;
pub mod error;
pub mod linalg;
pub mod problems;
pub mod solvers;
pub mod subspace;
pub mod svdtools;
pub mod table;

pub use error::{Error, Result};
