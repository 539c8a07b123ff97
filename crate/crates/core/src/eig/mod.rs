//! Approximate invariant subspace for the negative eigenvalues of a sparse
//! symmetric matrix, plus inertia counting on complete block factorizations.
//!
//! The deflation basis `(V, lambda)` is the expensive, amortized ingredient
//! of the two-level scheme: it is computed once per matrix and reused across
//! solves, optionally through an on-disk cache keyed by matrix content hash.

mod cache;
mod jacobi;
mod lanczos;

pub use cache::{load_basis, matrix_content_hash, save_basis};
pub use jacobi::jacobi_eigen;

use thiserror::Error;

use crate::precond::{ildlt_complete, BlockLDLFactors, PrecondError};
use crate::sparse::{DenseColumnBlock, SparseSymMatrix};

/// Orthonormal approximate invariant subspace for the negative eigenvalues.
#[derive(Debug, Clone)]
pub struct DeflationBasis {
    v: DenseColumnBlock,
    lambda: Vec<f64>,
    residual_norms: Vec<f64>,
}

impl DeflationBasis {
    /// Assemble a basis, enforcing orthonormality and negativity.
    pub fn new(
        v: DenseColumnBlock,
        lambda: Vec<f64>,
        residual_norms: Vec<f64>,
    ) -> Result<Self, EigError> {
        if lambda.len() != v.cols() || residual_norms.len() != v.cols() {
            return Err(EigError::Shape(format!(
                "basis with {} columns, {} eigenvalues, {} residuals",
                v.cols(),
                lambda.len(),
                residual_norms.len()
            )));
        }
        let defect = v.orthonormality_defect();
        if defect > 1e-10 {
            return Err(EigError::NotOrthonormal(defect));
        }
        for &l in &lambda {
            if l >= 0.0 {
                return Err(EigError::NotNegative(l));
            }
        }
        Ok(Self { v, lambda, residual_norms })
    }

    /// The k = 0 basis.
    pub fn empty(n: usize) -> Self {
        Self { v: DenseColumnBlock::empty(n), lambda: Vec::new(), residual_norms: Vec::new() }
    }

    pub fn n(&self) -> usize {
        self.v.rows()
    }

    pub fn k(&self) -> usize {
        self.v.cols()
    }

    pub fn v(&self) -> &DenseColumnBlock {
        &self.v
    }

    /// Negative eigenvalue approximations, ascending.
    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn residual_norms(&self) -> &[f64] {
        &self.residual_norms
    }

    /// |lambda| entries, the scaling of the deflation correction.
    pub fn abs_lambda(&self) -> Vec<f64> {
        self.lambda.iter().map(|l| l.abs()).collect()
    }

    /// 1/lambda entries, the scaling of the Woodbury correction.
    pub fn inv_lambda(&self) -> Vec<f64> {
        self.lambda.iter().map(|l| 1.0 / l).collect()
    }
}

/// Configuration for [`negative_eigenpairs`].
#[derive(Debug, Clone)]
pub struct EigConfig {
    /// Relative residual tolerance: accept (v, l) once ||Av - lv|| <= tol |l|.
    pub eig_tol: f64,
    /// Lanczos steps per restart cycle.
    pub max_lanczos_dim: usize,
    /// Dimension at or below which a dense eigendecomposition is used.
    pub dense_threshold: usize,
    /// Expected negative count; only sizes workspaces.
    pub k_hint: Option<usize>,
    /// Restart cycles before giving up.
    pub max_restarts: usize,
}

impl Default for EigConfig {
    fn default() -> Self {
        Self {
            eig_tol: 1e-8,
            max_lanczos_dim: 150,
            dense_threshold: 2000,
            k_hint: None,
            max_restarts: 200,
        }
    }
}

#[derive(Debug, Error)]
pub enum EigError {
    #[error("matrix is numerically singular: |{lambda:e}| below {threshold:e}")]
    NumericallySingular { lambda: f64, threshold: f64 },
    #[error("eigeniteration did not converge: {converged} of {expected} negative pairs found")]
    NoConvergence {
        converged: usize,
        expected: usize,
        /// What was found before running out of restarts.
        partial: Box<DeflationBasis>,
    },
    #[error("basis columns are not orthonormal: defect {0:e}")]
    NotOrthonormal(f64),
    #[error("eigenvalue {0} is not negative")]
    NotNegative(f64),
    #[error("inconsistent basis shape: {0}")]
    Shape(String),
    #[error("factorization failed: {0}")]
    Factorization(#[from] PrecondError),
    #[error("cache io: {0}")]
    CacheIo(#[from] std::io::Error),
    #[error("cache format: {0}")]
    CacheFormat(String),
}

/// All eigenpairs of `A` with negative eigenvalue.
///
/// Dense symmetric eigendecomposition up to `cfg.dense_threshold`; beyond
/// that, shift-invert Lanczos at shift zero (complete block LDL^T solves)
/// with full reorthogonalization and locking, run until the inertia count of
/// the factorization is matched. Deterministic: Lanczos start vectors come
/// from a fixed seed.
pub fn negative_eigenpairs(
    a: &SparseSymMatrix,
    cfg: &EigConfig,
) -> Result<DeflationBasis, EigError> {
    let n = a.n();
    let fro = a.frobenius_norm();
    if fro == 0.0 {
        return Err(EigError::NumericallySingular { lambda: 0.0, threshold: 0.0 });
    }
    let singular_floor = cfg.eig_tol * fro;

    if n <= cfg.dense_threshold {
        dense_negative_eigenpairs(a, cfg, singular_floor)
    } else {
        lanczos::shift_invert_negative_eigenpairs(a, cfg, singular_floor)
    }
}

fn dense_negative_eigenpairs(
    a: &SparseSymMatrix,
    cfg: &EigConfig,
    singular_floor: f64,
) -> Result<DeflationBasis, EigError> {
    let n = a.n();
    let (eigenvalues, vectors) = jacobi::jacobi_eigen(&a.to_dense());

    for &l in &eigenvalues {
        if l.abs() < singular_floor {
            return Err(EigError::NumericallySingular { lambda: l, threshold: singular_floor });
        }
    }

    let mut columns = Vec::new();
    let mut lambda = Vec::new();
    for (idx, &l) in eigenvalues.iter().enumerate().take_while(|&(_, &l)| l < 0.0) {
        lambda.push(l);
        columns.push(vectors.column(idx).iter().copied().collect::<Vec<f64>>());
    }
    let v = DenseColumnBlock::from_columns(n, &columns).expect("eigenvector columns");
    let residual_norms = eigen_residuals(a, &v, &lambda);
    let basis = DeflationBasis::new(v, lambda, residual_norms)?;
    for (r, l) in basis.residual_norms().iter().zip(basis.lambda()) {
        if *r > cfg.eig_tol * l.abs() {
            let expected = basis.k();
            return Err(EigError::NoConvergence {
                converged: expected - 1,
                expected,
                partial: Box::new(basis),
            });
        }
    }
    Ok(basis)
}

/// ||A v_i - lambda_i v_i|| for each column, with the sparse matvec.
pub(crate) fn eigen_residuals(
    a: &SparseSymMatrix,
    v: &DenseColumnBlock,
    lambda: &[f64],
) -> Vec<f64> {
    let mut out = Vec::with_capacity(lambda.len());
    let mut av = vec![0.0; a.n()];
    for (i, &l) in lambda.iter().enumerate() {
        let col = v.col(i);
        a.matvec_into(col, &mut av);
        let r = av
            .iter()
            .zip(col)
            .map(|(avi, vi)| {
                let d = avi - l * vi;
                d * d
            })
            .sum::<f64>()
            .sqrt();
        out.push(r);
    }
    out
}

/// Signs of the eigenvalues of the block diagonal of a COMPLETE
/// factorization: (negative, zero, positive). By Sylvester's law these are
/// the inertia of the factored matrix.
pub fn inertia_count(f: &BlockLDLFactors) -> (usize, usize, usize) {
    assert!(f.is_complete(), "inertia requires a complete factorization");
    let mut neg = 0;
    let mut zero = 0;
    let mut pos = 0;
    let mut tally = |l: f64| {
        if l < 0.0 {
            neg += 1;
        } else if l == 0.0 {
            zero += 1;
        } else {
            pos += 1;
        }
    };
    for blk in f.d_blocks() {
        let (l1, l2) = blk.eigenvalues();
        tally(l1);
        if let Some(l2) = l2 {
            tally(l2);
        }
    }
    (neg, zero, pos)
}

/// Count negative eigenvalues of `A` through a complete factorization.
pub fn negative_count(a: &SparseSymMatrix) -> Result<usize, EigError> {
    let f = ildlt_complete(a)?;
    Ok(inertia_count(&f).0)
}

/// Recomputed residual check used by property tests:
/// ||A V - V diag(lambda)||_F.
pub fn basis_block_residual(a: &SparseSymMatrix, basis: &DeflationBasis) -> f64 {
    let rs = eigen_residuals(a, basis.v(), basis.lambda());
    rs.iter().map(|r| r * r).sum::<f64>().sqrt()
}

/// Convenience wrapper: basis through the on-disk cache when a directory is
/// given, recomputing and persisting on miss.
pub fn negative_eigenpairs_cached(
    a: &SparseSymMatrix,
    cfg: &EigConfig,
    cache_dir: Option<&std::path::Path>,
) -> Result<DeflationBasis, EigError> {
    if let Some(dir) = cache_dir {
        if let Some(basis) = load_basis(dir, a, cfg.eig_tol)? {
            return Ok(basis);
        }
        let basis = negative_eigenpairs(a, cfg)?;
        save_basis(dir, a, cfg.eig_tol, &basis)?;
        return Ok(basis);
    }
    negative_eigenpairs(a, cfg)
}

pub(crate) fn orthonormalize_against(
    vec: &mut Vec<f64>,
    locked: &[Vec<f64>],
) -> Option<f64> {
    use crate::sparse::{axpy, dot, norm2};
    // two passes of classical Gram-Schmidt
    for _ in 0..2 {
        for q in locked {
            let c = dot(vec, q);
            axpy(-c, q, vec);
        }
    }
    let nrm = norm2(vec);
    if nrm < 1e-12 {
        return None;
    }
    for x in vec.iter_mut() {
        *x /= nrm;
    }
    Some(nrm)
}
