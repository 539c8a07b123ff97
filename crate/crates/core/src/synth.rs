//! Seeded generators for synthetic test systems with known spectra.
//!
//! Planted-spectrum matrices make exact oracles available to the test suites:
//! the constructions below return the eigenvector basis alongside the matrix,
//! so deflation bases, preconditioned spectra and inertia counts can all be
//! checked against ground truth instead of against the code under test.

use nalgebra::DMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::sparse::{DenseColumnBlock, SparseSymMatrix};

/// Random orthogonal matrix from the QR factorization of a Gaussian sample.
pub fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| {
        // Box-Muller from two uniforms; avoids an extra distribution dep.
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    });
    g.qr().q()
}

/// Symmetric matrix with the exact prescribed eigenvalues, `A = Q D Q^T`.
/// Returns the matrix and the orthogonal eigenvector matrix `Q` (column i
/// pairs with `eigenvalues[i]`).
pub fn planted_symmetric(
    eigenvalues: &[f64],
    seed: u64,
) -> (SparseSymMatrix, DMatrix<f64>) {
    let n = eigenvalues.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = random_orthogonal(n, &mut rng);
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(eigenvalues));
    let a = &q * d * q.transpose();
    // Symmetrize exactly; QR roundoff makes a*q^T differ across triangles.
    let sym = 0.5 * (&a + a.transpose());
    (SparseSymMatrix::from_dense(&sym), q)
}

/// Indefinite instance with exactly `k` negative eigenvalues.
///
/// Negative eigenvalues are drawn from (-3, -0.5) and positive ones from
/// (0.5, 3), keeping everything safely away from zero. Returns the matrix,
/// the exact negative eigenvalues (ascending) and the matching eigenvector
/// block.
pub fn random_indefinite(
    n: usize,
    k: usize,
    seed: u64,
) -> (SparseSymMatrix, Vec<f64>, DenseColumnBlock) {
    assert!(k <= n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9E3779B97F4A7C15);
    let mut eigs: Vec<f64> = (0..k).map(|_| -rng.gen_range(0.5..3.0)).collect();
    eigs.extend((0..n - k).map(|_| rng.gen_range(0.5..3.0)));
    let (a, q) = planted_symmetric(&eigs, seed);

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&x, &y| eigs[x].partial_cmp(&eigs[y]).unwrap());
    let lambda: Vec<f64> = order.iter().map(|&i| eigs[i]).collect();
    let cols: Vec<Vec<f64>> = order.iter().map(|&i| q.column(i).iter().copied().collect()).collect();
    let v = DenseColumnBlock::from_columns(n, &cols).expect("planted columns");
    (a, lambda, v)
}

/// Five-point 2D Dirichlet Laplacian on a rows-by-cols grid (SPD).
pub fn laplacian_2d_rect(rows: usize, cols: usize) -> SparseSymMatrix {
    let n = rows * cols;
    let mut triplets = Vec::new();
    for i in 0..rows {
        for j in 0..cols {
            let id = i * cols + j;
            triplets.push((id, id, 4.0));
            if i > 0 {
                triplets.push((id, id - cols, -1.0));
            }
            if j > 0 {
                triplets.push((id, id - 1, -1.0));
            }
        }
    }
    SparseSymMatrix::from_lower_triplets(n, &triplets).expect("laplacian pattern")
}

/// Square-grid special case of [`laplacian_2d_rect`].
pub fn laplacian_2d(p: usize) -> SparseSymMatrix {
    laplacian_2d_rect(p, p)
}

/// Analytic eigenvalues of [`laplacian_2d_rect`], ascending.
pub fn laplacian_2d_rect_eigenvalues(rows: usize, cols: usize) -> Vec<f64> {
    let hr = std::f64::consts::PI / (rows as f64 + 1.0);
    let hc = std::f64::consts::PI / (cols as f64 + 1.0);
    let mut eigs = Vec::with_capacity(rows * cols);
    for a in 1..=rows {
        for b in 1..=cols {
            eigs.push(4.0 - 2.0 * (a as f64 * hr).cos() - 2.0 * (b as f64 * hc).cos());
        }
    }
    eigs.sort_by(|x, y| x.partial_cmp(y).unwrap());
    eigs
}

/// Analytic eigenvalues of [`laplacian_2d`], ascending.
pub fn laplacian_2d_eigenvalues(p: usize) -> Vec<f64> {
    laplacian_2d_rect_eigenvalues(p, p)
}

/// Sparse indefinite matrix on a rectangular grid with a known negative
/// count, shifted into a spectral gap at or after the k-th eigenvalue.
/// Returns the matrix, the shift and the exact negative count.
pub fn shifted_rect_laplacian(
    rows: usize,
    cols: usize,
    k: usize,
) -> (SparseSymMatrix, f64, usize) {
    let n = rows * cols;
    assert!(k >= 1 && k < n);
    let eigs = laplacian_2d_rect_eigenvalues(rows, cols);
    let mut kk = k;
    while kk < n && eigs[kk] - eigs[kk - 1] < 1e-9 {
        kk += 1;
    }
    assert!(kk < n, "no spectral gap at or after {}", k);
    let sigma = 0.5 * (eigs[kk - 1] + eigs[kk]);
    (laplacian_2d_rect(rows, cols).shift_diagonal(sigma), sigma, kk)
}

/// Sparse indefinite matrix with a known negative eigenvalue count: the 2D
/// Laplacian shifted into a spectral gap at or after the k-th analytic
/// eigenvalue (degenerate eigenvalues cannot be split by a shift, so the
/// actual count can exceed the request). Returns the matrix, the shift and
/// the exact negative count.
pub fn shifted_laplacian(p: usize, k: usize) -> (SparseSymMatrix, f64, usize) {
    shifted_rect_laplacian(p, p, k)
}
