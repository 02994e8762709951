//! Iteratively reweighted least squares (IRLS) for basis pursuit.
//!
//! Solves `min ‖x‖₁ subject to Ax = y` through a sequence of weighted
//! least-squares problems with weights `1/max(|xᵢ|, ε)` and a smoothing
//! parameter `ε` driven by the best s-term approximation error of the
//! iterates. The crate contains:
//!
//! * [`linalg`]: dense kernels (Cholesky, Householder QR, Jacobi SVD, CG),
//! * [`objective`]: the smoothed ℓ1 objective, its quadratic majorizer,
//!   weights and the smoothing update,
//! * [`wls`]: the weighted least-squares step, either through the m×m
//!   normal equations or through a Woodbury reduction to the active set,
//! * [`irls`]: the main loop with per-iteration records,
//! * [`diagnostics`]: convergence factors, support identification,
//!   null space property constants and runtime certifiers of the global
//!   linear rate,
//! * [`lp`]: a small dense simplex used by the null space computations.
//!
//! The crate is `no_std` and only needs `alloc`.
#![cfg_attr(not(test), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod diagnostics;
pub mod error;
pub mod irls;
pub mod linalg;
pub mod lp;
pub mod objective;
pub mod wls;

pub use error::{Error, Result};
pub use irls::{
    irls_run, irls_step, InitialState, IterateState, IterationRecord, Problem, RunOutput, RunStatus, SolverConfig,
    WlsPath,
};
pub use linalg::{DenseMatrix, RangeFactors};
