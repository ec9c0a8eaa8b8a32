//! Resolvent decay envelopes, generalized eigenfunctions and barrier
//! constructions for Jacobi operators on the half-line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod barriers;
pub mod cli;
pub mod envelopes;
pub mod error;
pub mod mobility;
pub mod model;
pub mod scalar;
pub mod solutions;
pub mod tridiag;

pub use error::{Error, Result};
pub use model::ModelSpec;
pub use tridiag::{ResolventColumn, TridiagonalSlice};
