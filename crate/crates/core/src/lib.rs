//! Tensor-train (matrix product state) arithmetic and rank-adaptive
//! alternating solvers for linear systems `A x = y` whose operator and
//! right-hand side are given in tensor-train form.
//!
//! The crate is `no_std` and only needs `alloc`. It provides
//!
//! * [`tt`]: the [`TtVector`] / [`TtMatrix`] formats, exact algebra
//!   (addition, matrix-vector product, inner products), orthogonalization,
//!   SVD rounding and quantization into binary (QTT) modes;
//! * [`amen`]: the alternating minimal energy solver with SVD, pivoted
//!   Cholesky and ALS residual enrichment, plus fixed-rank ALS and
//!   two-site DMRG baselines;
//! * [`problems`]: Poisson, cascade chemical master equation and
//!   all-at-once Crank-Nicolson time systems;
//! * [`diagnostics`]: steepest-descent, Kantorovich and projection bounds
//!   and dense instrumentation of solver sweeps.
//!
//! Dense vectors use little-endian multi-index order: the first mode index
//! runs fastest.
#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod amen;
pub mod diagnostics;
mod error;
pub mod linalg;
pub mod problems;
pub mod tt;

pub use error::{Result, TtError};
pub use tt::{Core3, Core4, Endian, MultiIndex, OrthoTag, TtMatrix, TtVector};

/// Default cap on the number of entries any dense expansion may allocate.
pub const DEFAULT_DENSE_CAP: usize = 1 << 24;
