//! Sparse symmetric matrix storage, dense vector/block kernels and
//! Matrix Market ingestion.
//!
//! The central type is [`SparseSymMatrix`]: compressed sparse row storage of a
//! real symmetric matrix holding the *full* pattern (both triangles), so that
//! a matrix-vector product is a single CSR sweep. A general (possibly
//! nonsymmetric) companion type [`CsrMatrix`] backs the block operators of the
//! shifted real-equivalent pipeline.

mod csr;
mod dense;
mod market;

pub use csr::{CsrMatrix, SparseSymMatrix};
pub use dense::{axpy, dense_block_apply, dot, norm2, DenseColumnBlock, DenseVector};
pub use market::{
    load_matrix_market, load_matrix_market_general, save_matrix_market, MarketSymmetry,
};

use thiserror::Error;

/// Errors from sparse storage construction and Matrix Market parsing.
#[derive(Debug, Error)]
pub enum SparseError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value at entry ({row}, {col})")]
    NonFiniteValue { row: usize, col: usize },
    #[error("duplicate entry at ({row}, {col})")]
    DuplicateEntry { row: usize, col: usize },
    #[error("asymmetric value at ({row}, {col}): {a} vs {b}")]
    AsymmetricValue { row: usize, col: usize, a: f64, b: f64 },
    #[error("malformed Matrix Market header: {0}")]
    MalformedHeader(String),
    #[error("Matrix Market field is not real: {0}")]
    NonRealField(String),
    #[error("matrix is declared {0}, expected symmetric")]
    NotSymmetric(String),
    #[error("index out of range on line {line}: ({row}, {col}) for {n} rows")]
    IndexOutOfRange { line: usize, row: usize, col: usize, n: usize },
    #[error("malformed entry on line {line}: {msg}")]
    MalformedEntry { line: usize, msg: String },
    #[error("upper-triangle entry ({row}, {col}) in a symmetric file on line {line}")]
    UpperTriangleEntry { line: usize, row: usize, col: usize },
    #[error("entry count mismatch: header declares {declared}, file has {found}")]
    EntryCountMismatch { declared: usize, found: usize },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
