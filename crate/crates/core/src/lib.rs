//! Exact homological invariants of linear foliations.
//!
//! Everything is computed over [`Scalar`], an exact element of
//! `Q(i)(sqrt d1, sqrt d2)`, by sparse elimination on finite Fourier blocks.

pub mod derham;
pub mod error;
pub mod gysin;
pub mod hochschild;
pub mod linalg;
pub mod model;
pub mod poisson;
pub mod scalar;
pub mod specseq;
pub mod symbols;

pub use error::{Error, Result};
pub use linalg::{induced_rank, quotient_dim, SparseMatrix, SparseVec, Subspace};
pub use scalar::{Field, Scalar};
