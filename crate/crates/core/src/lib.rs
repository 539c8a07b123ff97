//! Iterative solution of sparse symmetric indefinite linear systems `Ax = b`
//! where the coefficient matrix has only a few negative eigenvalues.
//!
//! The centerpiece is a two-level nested scheme: an outer MINRES iteration
//! preconditioned by the low-rank spectral modification
//! `M = A + 2 V |L| V^T` (built from the negative eigenpairs of `A`), whose
//! systems are in turn solved by an inner conjugate gradient iteration that
//! tolerates a symmetric *indefinite* preconditioner such as an incomplete
//! factorization of `A` itself. A Sherman-Morrison-Woodbury variant applies
//! the low-rank correction on the inverse side instead.
//!
//! The crate also ships the comparison solver fleet (MINRES, CG, restarted
//! GMRES with true-residual stopping, nested FGMRES-GMRES, BiCGStab with
//! fractional iteration counts), incomplete factorizations (ILU(0), MILU,
//! block LDL^T with Bunch-Kaufman pivoting and its positive definite
//! modification), the complex-shift real-equivalent pipeline for quadratic
//! eigenvalue problems, and a benchmarking harness with a CLI.

pub mod bench;
pub mod eig;
pub mod krylov;
pub mod precond;
pub mod shiftreal;
pub mod sparse;
pub mod synth;

pub use eig::{DeflationBasis, EigConfig};
pub use krylov::{FailureKind, SolveConfig, SolveReport};
pub use precond::{BlockLDLFactors, DeflatedOperator, IluFactors, SmwInverse};
pub use sparse::{CsrMatrix, DenseColumnBlock, DenseVector, SparseSymMatrix};
