use super::{PrecondError, PreconditionerAction};
use crate::eig::DeflationBasis;
use crate::sparse::{DenseVector, SparseSymMatrix};

/// The deflated operator `M = A + 2 V |L| V^T`, applied matrix-free.
///
/// With an exact basis for the negative eigenpairs this is the absolute
/// value of `A` restricted to flipping those eigenvalues, hence symmetric
/// positive definite, while costing only `O(nnz + k n)` per application.
pub struct DeflatedOperator<'a> {
    a: &'a SparseSymMatrix,
    basis: &'a DeflationBasis,
    abs_lambda: Vec<f64>,
}

impl<'a> DeflatedOperator<'a> {
    pub fn new(a: &'a SparseSymMatrix, basis: &'a DeflationBasis) -> Result<Self, PrecondError> {
        if basis.n() != a.n() {
            return Err(PrecondError::DimensionMismatch { expected: a.n(), got: basis.n() });
        }
        Ok(Self { a, basis, abs_lambda: basis.abs_lambda() })
    }

    pub fn n(&self) -> usize {
        self.a.n()
    }

    pub fn matrix(&self) -> &SparseSymMatrix {
        self.a
    }

    pub fn basis(&self) -> &DeflationBasis {
        self.basis
    }

    /// `M u = A u + 2 (V (|L| (V^T u)))`, evaluated in exactly that factored
    /// order; the dense matrix is never formed.
    pub fn apply_into(&self, u: &[f64], out: &mut [f64]) {
        self.a.matvec_into(u, out);
        if self.basis.k() == 0 {
            return;
        }
        let mut c = self.basis.v().transpose_apply(u);
        for (ci, li) in c.iter_mut().zip(&self.abs_lambda) {
            *ci *= li;
        }
        let corr = self.basis.v().apply(&c);
        for (o, ci) in out.iter_mut().zip(&corr) {
            *o += 2.0 * ci;
        }
    }

    /// Dense assembly for oracles and spectrum tests (small n only).
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.n();
        let mut m = self.a.to_dense();
        for i in 0..self.basis.k() {
            let col = self.basis.v().col(i);
            let w = 2.0 * self.abs_lambda[i];
            for r in 0..n {
                for c in 0..n {
                    m[(r, c)] += w * col[r] * col[c];
                }
            }
        }
        m
    }
}

/// `M u` with dimension checking; the operation-level entry point.
pub fn deflated_apply(
    op: &DeflatedOperator<'_>,
    u: &DenseVector,
) -> Result<DenseVector, PrecondError> {
    if u.len() != op.n() {
        return Err(PrecondError::DimensionMismatch { expected: op.n(), got: u.len() });
    }
    let mut out = vec![0.0; op.n()];
    op.apply_into(u.as_slice(), &mut out);
    Ok(DenseVector::from_vec_unchecked(out))
}

/// Sherman-Morrison-Woodbury form of the deflated inverse:
/// `M^{-1} g = Ainv g - 2 V L^{-1} V^T g`, with the action of `Ainv`
/// supplied by an inner solver (typically triangular solves with incomplete
/// factors). Costs one inner application plus `O(k n)`; no extra storage.
pub struct SmwInverse<'a> {
    inner_solver: Box<dyn PreconditionerAction + 'a>,
    basis: &'a DeflationBasis,
    inv_lambda: Vec<f64>,
}

impl<'a> SmwInverse<'a> {
    pub fn new(
        inner_solver: Box<dyn PreconditionerAction + 'a>,
        basis: &'a DeflationBasis,
    ) -> Result<Self, PrecondError> {
        if inner_solver.dim() != basis.n() {
            return Err(PrecondError::DimensionMismatch {
                expected: basis.n(),
                got: inner_solver.dim(),
            });
        }
        Ok(Self { inner_solver, basis, inv_lambda: basis.inv_lambda() })
    }

    pub fn n(&self) -> usize {
        self.basis.n()
    }

    fn apply_correction(&self, g: &[f64], out: &mut [f64]) {
        if self.basis.k() == 0 {
            return;
        }
        let mut c = self.basis.v().transpose_apply(g);
        for (ci, li) in c.iter_mut().zip(&self.inv_lambda) {
            *ci *= li;
        }
        let corr = self.basis.v().apply(&c);
        for (o, ci) in out.iter_mut().zip(&corr) {
            *o -= 2.0 * ci;
        }
    }
}

impl PreconditionerAction for SmwInverse<'_> {
    fn dim(&self) -> usize {
        self.n()
    }

    fn apply_into(&self, g: &[f64], out: &mut [f64]) {
        self.inner_solver.apply_into(g, out);
        self.apply_correction(g, out);
    }

    fn label(&self) -> String {
        format!("smw:{}", self.inner_solver.label())
    }
}

/// `M^{-1} g` with dimension checking; the operation-level entry point.
pub fn smw_apply(s: &SmwInverse<'_>, g: &DenseVector) -> Result<DenseVector, PrecondError> {
    if g.len() != s.n() {
        return Err(PrecondError::DimensionMismatch { expected: s.n(), got: g.len() });
    }
    let mut out = vec![0.0; s.n()];
    s.apply_into(g.as_slice(), &mut out);
    Ok(DenseVector::from_vec_unchecked(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eig::{negative_eigenpairs, EigConfig};
    use crate::precond::DenseInverse;
    use crate::sparse::DenseColumnBlock;

    fn basis_e2_minus2() -> DeflationBasis {
        let v = DenseColumnBlock::from_columns(2, &[vec![0.0, 1.0]]).unwrap();
        DeflationBasis::new(v, vec![-2.0], vec![0.0]).unwrap()
    }

    #[test]
    fn deflated_apply_diag_example() {
        // A = diag(1,-2), V = e2, L = (-2), u = (1,1): Au = (1,-2),
        // correction (0,4), so M u = (1,2).
        let a = SparseSymMatrix::diagonal(&[1.0, -2.0]);
        let basis = basis_e2_minus2();
        let op = DeflatedOperator::new(&a, &basis).unwrap();
        let u = DenseVector::new(vec![1.0, 1.0]).unwrap();
        let y = deflated_apply(&op, &u).unwrap();
        assert_eq!(y.as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn deflated_apply_empty_basis_is_plain_matvec() {
        let a = SparseSymMatrix::diagonal(&[3.0, -4.0]);
        let basis = DeflationBasis::empty(2);
        let op = DeflatedOperator::new(&a, &basis).unwrap();
        let u = DenseVector::new(vec![1.0, 1.0]).unwrap();
        let y = deflated_apply(&op, &u).unwrap();
        assert_eq!(y.as_slice(), &[3.0, -4.0]);
    }

    #[test]
    fn deflated_apply_scalar_absolute_value() {
        // A = (-1), V = (1), L = (-1), u = (3): -3 + 2*3 = 3, i.e. |A| u.
        let a = SparseSymMatrix::diagonal(&[-1.0]);
        let v = DenseColumnBlock::from_columns(1, &[vec![1.0]]).unwrap();
        let basis = DeflationBasis::new(v, vec![-1.0], vec![0.0]).unwrap();
        let op = DeflatedOperator::new(&a, &basis).unwrap();
        let u = DenseVector::new(vec![3.0]).unwrap();
        let y = deflated_apply(&op, &u).unwrap();
        assert_eq!(y.as_slice(), &[3.0]);
    }

    #[test]
    fn deflated_apply_dimension_mismatch() {
        let a = SparseSymMatrix::diagonal(&[1.0, -2.0]);
        let basis = basis_e2_minus2();
        let op = DeflatedOperator::new(&a, &basis).unwrap();
        let u = DenseVector::new(vec![1.0]).unwrap();
        assert!(deflated_apply(&op, &u).is_err());
    }

    #[test]
    fn smw_exact_inner_matches_deflated_inverse() {
        // A = diag(1,-2), exact inner solve: M = diag(1,2), so
        // M^{-1} (1,2) = (1,1).
        let a = SparseSymMatrix::diagonal(&[1.0, -2.0]);
        let basis = basis_e2_minus2();
        let inner = DenseInverse::new(a.to_dense(), "exact");
        let smw = SmwInverse::new(Box::new(&inner), &basis).unwrap();
        let g = DenseVector::new(vec![1.0, 2.0]).unwrap();
        let y = smw_apply(&smw, &g).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-14);
        assert!((y[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn smw_empty_basis_is_inner_solver() {
        let a = SparseSymMatrix::diagonal(&[2.0, 4.0]);
        let basis = DeflationBasis::empty(2);
        let inner = DenseInverse::new(a.to_dense(), "exact");
        let smw = SmwInverse::new(Box::new(&inner), &basis).unwrap();
        let g = DenseVector::new(vec![2.0, 4.0]).unwrap();
        let y = smw_apply(&smw, &g).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-14);
        assert!((y[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn smw_zero_maps_to_zero() {
        let a = SparseSymMatrix::diagonal(&[1.0, -2.0]);
        let basis = basis_e2_minus2();
        let inner = DenseInverse::new(a.to_dense(), "exact");
        let smw = SmwInverse::new(Box::new(&inner), &basis).unwrap();
        let g = DenseVector::new(vec![0.0, 0.0]).unwrap();
        let y = smw_apply(&smw, &g).unwrap();
        assert_eq!(y.as_slice(), &[0.0, 0.0]);
    }

    // With an exact inner solve, applying M then M^{-1} is the identity.
    #[test]
    fn smw_identity_against_deflated_apply() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for seed in 0..5 {
            let k = 1 + (seed as usize) % 3;
            let (a, _, _) = crate::synth::random_indefinite(40, k, 600 + seed);
            let basis = negative_eigenpairs(&a, &EigConfig::default()).unwrap();
            let op = DeflatedOperator::new(&a, &basis).unwrap();
            let inner = DenseInverse::new(a.to_dense(), "exact");
            let smw = SmwInverse::new(Box::new(&inner), &basis).unwrap();
            let x: Vec<f64> = (0..40).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let xv = DenseVector::new(x.clone()).unwrap();
            let mx = deflated_apply(&op, &xv).unwrap();
            let back = smw_apply(&smw, &mx).unwrap();
            let diff: f64 = back
                .iter()
                .zip(&x)
                .map(|(b, x)| (b - x) * (b - x))
                .sum::<f64>()
                .sqrt();
            let norm: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(diff <= 1e-10 * norm, "round trip error {} (seed {})", diff, seed);
        }
    }

    // Exact deflation turns the spectrum into |lambda|: M is SPD and its
    // eigenvalues are the magnitudes of A's.
    #[test]
    fn dense_assembly_spectrum_is_absolute_values() {
        let (a, _, _) = crate::synth::random_indefinite(30, 4, 123);
        let basis = negative_eigenpairs(&a, &EigConfig::default()).unwrap();
        let op = DeflatedOperator::new(&a, &basis).unwrap();
        let m = op.to_dense();
        let mut expected: Vec<f64> =
            crate::eig::jacobi_eigen(&a.to_dense()).0.iter().map(|l| l.abs()).collect();
        expected.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let (got, _) = crate::eig::jacobi_eigen(&m);
        for (g, e) in got.iter().zip(&expected) {
            assert!((g - e).abs() < 1e-8 * e.max(1.0), "{} vs {}", g, e);
            assert!(*g > 0.0);
        }
    }

    // Matrix-free application agrees with the dense assembly.
    #[test]
    fn apply_matches_dense_assembly() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (a, _, _) = crate::synth::random_indefinite(50, 5, 321);
        let basis = negative_eigenpairs(&a, &EigConfig::default()).unwrap();
        let op = DeflatedOperator::new(&a, &basis).unwrap();
        let dense = op.to_dense();
        for _ in 0..5 {
            let u: Vec<f64> = (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let uv = DenseVector::new(u.clone()).unwrap();
            let fast = deflated_apply(&op, &uv).unwrap();
            let slow = &dense * nalgebra::DVector::from_row_slice(&u);
            let denom = slow.norm().max(1e-30);
            let diff: f64 = fast
                .iter()
                .zip(slow.iter())
                .map(|(f, s)| (f - s) * (f - s))
                .sum::<f64>()
                .sqrt();
            assert!(diff <= 1e-12 * denom.max(1.0), "relative error {}", diff / denom);
        }
    }
}
