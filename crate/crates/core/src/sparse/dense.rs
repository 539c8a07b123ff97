use super::SparseError;

/// Dense real vector with finite entries.
///
/// Solver entry points reject NaN/Inf up front; internal kernels then work on
/// plain slices without re-checking.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseVector {
    entries: Vec<f64>,
}

impl DenseVector {
    /// Validating constructor: every entry must be finite.
    pub fn new(entries: Vec<f64>) -> Result<Self, SparseError> {
        for (i, &v) in entries.iter().enumerate() {
            if !v.is_finite() {
                return Err(SparseError::NonFiniteValue { row: i, col: 0 });
            }
        }
        Ok(Self { entries })
    }

    /// Wrap values produced by trusted internal computation.
    pub fn from_vec_unchecked(entries: Vec<f64>) -> Self {
        Self { entries }
    }

    pub fn zeros(n: usize) -> Self {
        Self { entries: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.entries
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.entries
    }

    pub fn norm2(&self) -> f64 {
        norm2(&self.entries)
    }
}

impl std::ops::Deref for DenseVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.entries
    }
}

impl AsRef<[f64]> for DenseVector {
    fn as_ref(&self) -> &[f64] {
        &self.entries
    }
}

/// Euclidean norm of a slice.
pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Dot product with a fixed left-to-right summation order.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// y += alpha * x
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Dense n-by-k block stored column-major; holds deflation bases and
/// recycled workspaces.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseColumnBlock {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseColumnBlock {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= cols, "block must be tall: rows {} < cols {}", rows, cols);
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    /// Build from column slices; all columns must have the same length.
    pub fn from_columns(rows: usize, columns: &[Vec<f64>]) -> Result<Self, SparseError> {
        let cols = columns.len();
        let mut data = Vec::with_capacity(rows * cols);
        for col in columns {
            if col.len() != rows {
                return Err(SparseError::DimensionMismatch { expected: rows, got: col.len() });
            }
            data.extend_from_slice(col);
        }
        Ok(Self { rows, cols, data })
    }

    /// Build from raw column-major data.
    pub fn from_column_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, SparseError> {
        if data.len() != rows * cols {
            return Err(SparseError::DimensionMismatch { expected: rows * cols, got: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    /// Empty basis (k = 0).
    pub fn empty(rows: usize) -> Self {
        Self { rows, cols: 0, data: Vec::new() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// w = V^T x (length k).
    pub fn transpose_apply(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.rows);
        (0..self.cols).map(|j| dot(self.col(j), x)).collect()
    }

    /// y = V c (length n).
    pub fn apply(&self, c: &[f64]) -> Vec<f64> {
        debug_assert_eq!(c.len(), self.cols);
        let mut y = vec![0.0; self.rows];
        for j in 0..self.cols {
            axpy(c[j], self.col(j), &mut y);
        }
        y
    }

    /// Computes V diag(scale) V^T x with two rank-k kernels, O(k n) cost.
    pub fn scaled_outer_apply(
        &self,
        scale: &[f64],
        x: &DenseVector,
    ) -> Result<DenseVector, SparseError> {
        if x.len() != self.rows {
            return Err(SparseError::DimensionMismatch { expected: self.rows, got: x.len() });
        }
        if scale.len() != self.cols {
            return Err(SparseError::DimensionMismatch { expected: self.cols, got: scale.len() });
        }
        let mut c = self.transpose_apply(x);
        for (ci, si) in c.iter_mut().zip(scale) {
            *ci *= si;
        }
        Ok(DenseVector::from_vec_unchecked(self.apply(&c)))
    }

    /// Frobenius norm of V^T V - I, the orthonormality defect.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.cols {
            for j in 0..self.cols {
                let g = dot(self.col(i), self.col(j));
                let target = if i == j { 1.0 } else { 0.0 };
                acc += (g - target) * (g - target);
            }
        }
        acc.sqrt()
    }
}

/// Applies `V diag(scale) V^T x`; thin wrapper kept as a free function to
/// mirror the kernel's role in the preconditioner compositions.
pub fn dense_block_apply(
    v: &DenseColumnBlock,
    scale: &[f64],
    x: &DenseVector,
) -> Result<DenseVector, SparseError> {
    v.scaled_outer_apply(scale, x)
}
