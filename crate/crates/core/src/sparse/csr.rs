use std::collections::BTreeMap;

use super::{DenseVector, SparseError};

/// Sparse real symmetric matrix in CSR form storing the full pattern.
///
/// Both triangles are stored so a matrix-vector product is one CSR sweep and
/// `nnz()` matches the full-pattern counts reported for collection matrices.
/// Column indices are strictly increasing within a row and rows are summed
/// left to right, which makes products deterministic for fixed inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix {
    n: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymMatrix {
    /// Build from entries of the lower triangle (row >= col); the strict
    /// lower part is mirrored exactly once. Duplicates are rejected.
    pub fn from_lower_triplets(
        n: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self, SparseError> {
        let mut map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for &(i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(SparseError::IndexOutOfRange { line: 0, row: i, col: j, n });
            }
            if j > i {
                return Err(SparseError::UpperTriangleEntry { line: 0, row: i, col: j });
            }
            if !v.is_finite() {
                return Err(SparseError::NonFiniteValue { row: i, col: j });
            }
            if map.insert((i, j), v).is_some() {
                return Err(SparseError::DuplicateEntry { row: i, col: j });
            }
        }
        let mut full: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (&(i, j), &v) in &map {
            full.insert((i, j), v);
            if i != j {
                full.insert((j, i), v);
            }
        }
        Ok(Self::from_sorted_map(n, &full))
    }

    /// Build from a full symmetric entry set: every off-diagonal (i, j, v)
    /// must come with its mirror (j, i, v), bit-identical.
    pub fn from_full_triplets(
        n: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self, SparseError> {
        let mut map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for &(i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(SparseError::IndexOutOfRange { line: 0, row: i, col: j, n });
            }
            if !v.is_finite() {
                return Err(SparseError::NonFiniteValue { row: i, col: j });
            }
            if map.insert((i, j), v).is_some() {
                return Err(SparseError::DuplicateEntry { row: i, col: j });
            }
        }
        for (&(i, j), &v) in &map {
            match map.get(&(j, i)) {
                Some(&w) if w == v => {}
                Some(&w) => {
                    return Err(SparseError::AsymmetricValue { row: i, col: j, a: v, b: w })
                }
                None => {
                    return Err(SparseError::AsymmetricValue { row: i, col: j, a: v, b: 0.0 })
                }
            }
        }
        Ok(Self::from_sorted_map(n, &map))
    }

    fn from_sorted_map(n: usize, map: &BTreeMap<(usize, usize), f64>) -> Self {
        let nnz = map.len();
        let mut row_offsets = vec![0usize; n + 1];
        let mut col_indices = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        for (&(i, j), &v) in map {
            row_offsets[i + 1] += 1;
            col_indices.push(j);
            values.push(v);
        }
        for i in 0..n {
            row_offsets[i + 1] += row_offsets[i];
        }
        Self { n, row_offsets, col_indices, values }
    }

    /// Identity of dimension n.
    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    /// Diagonal matrix from the given entries (zeros kept in the pattern).
    pub fn diagonal(d: &[f64]) -> Self {
        let n = d.len();
        Self {
            n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: d.to_vec(),
        }
    }

    /// Convert a dense symmetric matrix, keeping every nonzero entry plus the
    /// whole diagonal. Values are taken from the lower triangle so the stored
    /// mirror pairs are bit-identical even if the input has roundoff skew.
    pub fn from_dense(a: &nalgebra::DMatrix<f64>) -> Self {
        assert_eq!(a.nrows(), a.ncols());
        let n = a.nrows();
        let mut map = BTreeMap::new();
        for i in 0..n {
            map.insert((i, i), a[(i, i)]);
            for j in 0..i {
                let v = a[(i, j)];
                if v != 0.0 {
                    map.insert((i, j), v);
                    map.insert((j, i), v);
                }
            }
        }
        Self::from_sorted_map(n, &map)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for idx in self.row_offsets[i]..self.row_offsets[i + 1] {
                m[(i, self.col_indices[idx])] = self.values[idx];
            }
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Stored nonzero count (full pattern).
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row i.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let lo = self.row_offsets[i];
        let hi = self.row_offsets[i + 1];
        (&self.col_indices[lo..hi], &self.values[lo..hi])
    }

    /// Entry (i, j), zero if absent from the pattern.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(pos) => vals[pos],
            Err(_) => 0.0,
        }
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// y = A x into a caller-provided buffer; rows are summed left to right.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let mut acc = 0.0;
            for idx in self.row_offsets[i]..self.row_offsets[i + 1] {
                acc += self.values[idx] * x[self.col_indices[idx]];
            }
            y[i] = acc;
        }
    }

    /// y = A x.
    pub fn matvec(&self, x: &DenseVector) -> Result<DenseVector, SparseError> {
        if x.len() != self.n {
            return Err(SparseError::DimensionMismatch { expected: self.n, got: x.len() });
        }
        let mut y = vec![0.0; self.n];
        self.matvec_into(x.as_slice(), &mut y);
        Ok(DenseVector::from_vec_unchecked(y))
    }

    /// A - sigma I on the union pattern (diagonal entries added if missing).
    pub fn shift_diagonal(&self, sigma: f64) -> SparseSymMatrix {
        let mut map = BTreeMap::new();
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                map.insert((i, j), v);
            }
        }
        for i in 0..self.n {
            *map.entry((i, i)).or_insert(0.0) -= sigma;
        }
        Self::from_sorted_map(self.n, &map)
    }

    /// alpha * self, same pattern.
    pub fn scaled(&self, alpha: f64) -> SparseSymMatrix {
        let mut out = self.clone();
        for v in out.values.iter_mut() {
            *v *= alpha;
        }
        out
    }

    /// alpha * self + beta * other on the union pattern. Deterministic:
    /// the result depends only on the operands, not on evaluation order.
    pub fn linear_combination(
        &self,
        alpha: f64,
        other: &SparseSymMatrix,
        beta: f64,
    ) -> SparseSymMatrix {
        assert_eq!(self.n, other.n);
        let mut map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                map.insert((i, j), alpha * v);
            }
        }
        for i in 0..other.n {
            let (cols, vals) = other.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                *map.entry((i, j)).or_insert(0.0) += beta * v;
            }
        }
        Self::from_sorted_map(self.n, &map)
    }

    /// Symmetric congruence scaling: returns diag(s) A diag(s).
    pub fn scale_symmetric(&self, s: &[f64]) -> SparseSymMatrix {
        assert_eq!(s.len(), self.n);
        let mut out = self.clone();
        for i in 0..self.n {
            for idx in out.row_offsets[i]..out.row_offsets[i + 1] {
                let j = out.col_indices[idx];
                out.values[idx] *= s[i] * s[j];
            }
        }
        out
    }

    /// Symmetric permutation: returns P A P^T where (P A P^T)(i, j) =
    /// A(perm[i], perm[j]); `perm[new] = old`.
    pub fn permute_symmetric(&self, perm: &[usize]) -> SparseSymMatrix {
        assert_eq!(perm.len(), self.n);
        let mut inv = vec![0usize; self.n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut map = BTreeMap::new();
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                map.insert((inv[i], inv[j]), v);
            }
        }
        Self::from_sorted_map(self.n, &map)
    }

    /// Structural and numerical invariant check; used by tests and ingestion.
    pub fn validate(&self) -> Result<(), SparseError> {
        if self.row_offsets.len() != self.n + 1 || *self.row_offsets.last().unwrap() != self.nnz()
        {
            return Err(SparseError::MalformedEntry {
                line: 0,
                msg: "row offsets inconsistent with nnz".into(),
            });
        }
        for i in 0..self.n {
            let (cols, _) = self.row(i);
            for w in cols.windows(2) {
                if w[0] >= w[1] {
                    return Err(SparseError::DuplicateEntry { row: i, col: w[1] });
                }
            }
        }
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let w = self.get(j, i);
                if w != v {
                    return Err(SparseError::AsymmetricValue { row: i, col: j, a: v, b: w });
                }
            }
        }
        Ok(())
    }
}

/// General sparse matrix in CSR form; plumbing for the nonsymmetric blocks of
/// the shifted real-equivalent pipeline (skew and general QEP parts, block
/// pencils).
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self, SparseError> {
        let mut map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for &(i, j, v) in triplets {
            if i >= rows || j >= cols {
                return Err(SparseError::IndexOutOfRange { line: 0, row: i, col: j, n: rows });
            }
            if !v.is_finite() {
                return Err(SparseError::NonFiniteValue { row: i, col: j });
            }
            if map.insert((i, j), v).is_some() {
                return Err(SparseError::DuplicateEntry { row: i, col: j });
            }
        }
        let nnz = map.len();
        let mut row_offsets = vec![0usize; rows + 1];
        let mut col_indices = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        for (&(i, j), &v) in &map {
            row_offsets[i + 1] += 1;
            col_indices.push(j);
            values.push(v);
        }
        for i in 0..rows {
            row_offsets[i + 1] += row_offsets[i];
        }
        Ok(Self { rows, cols, row_offsets, col_indices, values })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            row_offsets: vec![0; rows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn from_sym(a: &SparseSymMatrix) -> Self {
        Self {
            rows: a.n(),
            cols: a.n(),
            row_offsets: a.row_offsets().to_vec(),
            col_indices: a.col_indices().to_vec(),
            values: a.values().to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let lo = self.row_offsets[i];
        let hi = self.row_offsets[i + 1];
        (&self.col_indices[lo..hi], &self.values[lo..hi])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(pos) => vals[pos],
            Err(_) => 0.0,
        }
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        for i in 0..self.rows {
            let mut acc = 0.0;
            for idx in self.row_offsets[i]..self.row_offsets[i + 1] {
                acc += self.values[idx] * x[self.col_indices[idx]];
            }
            y[i] = acc;
        }
    }

    /// y += alpha * A x
    pub fn matvec_add_into(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        for i in 0..self.rows {
            let mut acc = 0.0;
            for idx in self.row_offsets[i]..self.row_offsets[i + 1] {
                acc += self.values[idx] * x[self.col_indices[idx]];
            }
            y[i] += alpha * acc;
        }
    }

    /// C = alpha * self + beta * other, pattern union.
    pub fn linear_combination(&self, alpha: f64, other: &CsrMatrix, beta: f64) -> CsrMatrix {
        assert_eq!(self.rows, other.rows);
        assert_eq!(self.cols, other.cols);
        let mut map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                *map.entry((i, j)).or_insert(0.0) += alpha * v;
            }
        }
        for i in 0..other.rows {
            let (cols, vals) = other.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                *map.entry((i, j)).or_insert(0.0) += beta * v;
            }
        }
        let triplets: Vec<_> = map.into_iter().map(|((i, j), v)| (i, j, v)).collect();
        CsrMatrix::from_triplets(self.rows, self.cols, &triplets).expect("union of valid patterns")
    }

    /// Max relative asymmetry |A - A^T| / ||A||_F; zero for exactly symmetric.
    pub fn asymmetry(&self) -> f64 {
        let fro = self.values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if fro == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst / fro
    }

    /// Max relative defect from skew-symmetry |A + A^T| / ||A||_F.
    pub fn skew_defect(&self) -> f64 {
        let fro = self.values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if fro == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                worst = worst.max((v + self.get(j, i)).abs());
            }
        }
        worst / fro
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Interpret as symmetric storage; fails if pattern or values are skewed.
    pub fn into_symmetric(self) -> Result<SparseSymMatrix, SparseError> {
        assert_eq!(self.rows, self.cols);
        let mut triplets = Vec::with_capacity(self.nnz());
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                triplets.push((i, j, v));
            }
        }
        SparseSymMatrix::from_full_triplets(self.rows, &triplets)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::dense::norm2;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matvec_identity() {
        let a = SparseSymMatrix::identity(3);
        let x = DenseVector::new(vec![1.0, 2.0, 3.0]).unwrap();
        let y = a.matvec(&x).unwrap();
        assert_eq!(y.as_slice(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn matvec_diagonal() {
        let a = SparseSymMatrix::diagonal(&[1.0, -2.0]);
        let x = DenseVector::new(vec![1.0, 1.0]).unwrap();
        let y = a.matvec(&x).unwrap();
        assert_eq!(y.as_slice(), &[1.0, -2.0]);
    }

    #[test]
    fn matvec_permutation_case() {
        let a = SparseSymMatrix::from_lower_triplets(2, &[(1, 0, 1.0)]).unwrap();
        let x = DenseVector::new(vec![3.0, 4.0]).unwrap();
        let y = a.matvec(&x).unwrap();
        assert_eq!(y.as_slice(), &[4.0, 3.0]);
    }

    #[test]
    fn matvec_dimension_mismatch() {
        let a = SparseSymMatrix::identity(3);
        let x = DenseVector::new(vec![1.0, 2.0]).unwrap();
        assert!(a.matvec(&x).is_err());
    }

    #[test]
    fn mirror_expansion_from_lower() {
        let a =
            SparseSymMatrix::from_lower_triplets(2, &[(0, 0, 2.0), (1, 0, 1.0), (1, 1, 3.0)])
                .unwrap();
        assert_eq!(a.nnz(), 4);
        assert_eq!(a.get(0, 1), 1.0);
        assert_eq!(a.get(1, 0), 1.0);
        a.validate().unwrap();
    }

    #[test]
    fn rejects_duplicates_and_asymmetry() {
        assert!(SparseSymMatrix::from_lower_triplets(2, &[(1, 0, 1.0), (1, 0, 2.0)]).is_err());
        assert!(SparseSymMatrix::from_full_triplets(2, &[(0, 1, 1.0), (1, 0, 2.0)]).is_err());
        assert!(SparseSymMatrix::from_full_triplets(2, &[(0, 1, 1.0)]).is_err());
    }

    // x^T (A y) == y^T (A x) for symmetric A, within roundoff scaled by the
    // problem size.
    #[test]
    fn matvec_symmetry_bilinear_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let n = 40;
            let mut triplets = Vec::new();
            for i in 0..n {
                triplets.push((i, i, rng.gen_range(-2.0..2.0)));
                for j in 0..i {
                    if rng.gen_bool(0.1) {
                        triplets.push((i, j, rng.gen_range(-1.0..1.0)));
                    }
                }
            }
            let a = SparseSymMatrix::from_lower_triplets(n, &triplets).unwrap();
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut ax = vec![0.0; n];
            let mut ay = vec![0.0; n];
            a.matvec_into(&x, &mut ax);
            a.matvec_into(&y, &mut ay);
            let xtay: f64 = x.iter().zip(&ay).map(|(u, v)| u * v).sum();
            let ytax: f64 = y.iter().zip(&ax).map(|(u, v)| u * v).sum();
            let bound = 1e-13 * a.frobenius_norm() * norm2(&x) * norm2(&y);
            assert!((xtay - ytax).abs() <= bound.max(1e-14));
        }
    }

    #[test]
    fn shift_diagonal_adds_missing_entries() {
        let a = SparseSymMatrix::from_lower_triplets(2, &[(1, 0, 1.0)]).unwrap();
        let b = a.shift_diagonal(0.5);
        assert_eq!(b.get(0, 0), -0.5);
        assert_eq!(b.get(1, 1), -0.5);
        assert_eq!(b.get(0, 1), 1.0);
        b.validate().unwrap();
    }

    #[test]
    fn permute_round_trip() {
        let a = SparseSymMatrix::from_lower_triplets(
            3,
            &[(0, 0, 1.0), (1, 1, 2.0), (2, 2, 3.0), (2, 0, 4.0)],
        )
        .unwrap();
        let perm = vec![2, 0, 1];
        let b = a.permute_symmetric(&perm);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(b.get(i, j), a.get(perm[i], perm[j]));
            }
        }
    }

    #[test]
    fn csr_general_skew_checks() {
        let skew = CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (1, 0, -1.0)]).unwrap();
        assert_eq!(skew.skew_defect(), 0.0);
        assert!(skew.asymmetry() > 0.0);
        let sym = CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        assert_eq!(sym.asymmetry(), 0.0);
    }
}
