//! Quench dynamics of one-dimensional Ising chains with power-law,
//! nearest-neighbor and slanted-field couplings.
//!
//! Truncated matrix product states are evolved with fourth-order TEBD or
//! two-site TDVP and checked against exact solvers: dense diagonalization,
//! free fermions for the nearest-neighbor transverse-field chain, and the
//! collective-spin (LMG) limit of all-to-all couplings. On top of that sit
//! the order parameters, their fits, and finite-size scaling collapses.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod evolve;
pub mod exact;
pub mod experiment;
pub mod fss;
pub mod linalg;
pub mod model;
pub mod mps;
pub mod observables;
pub mod optim;

extern crate blas_src;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
