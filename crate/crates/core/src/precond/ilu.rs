use std::collections::BTreeMap;

use super::{PrecondError, PreconditionerAction};
use crate::sparse::SparseSymMatrix;

/// Incomplete LU factors. L is strictly lower unit-diagonal, U holds the
/// diagonal and upper part; both stored CSR.
#[derive(Debug, Clone)]
pub struct IluFactors {
    n: usize,
    l_offsets: Vec<usize>,
    l_cols: Vec<usize>,
    l_vals: Vec<f64>,
    u_offsets: Vec<usize>,
    u_cols: Vec<usize>,
    u_vals: Vec<f64>,
    modified: bool,
    label: String,
}

impl IluFactors {
    fn from_rows(
        n: usize,
        rows: Vec<BTreeMap<usize, f64>>,
        modified: bool,
        label: String,
    ) -> Self {
        let mut l_offsets = vec![0usize];
        let mut l_cols = Vec::new();
        let mut l_vals = Vec::new();
        let mut u_offsets = vec![0usize];
        let mut u_cols = Vec::new();
        let mut u_vals = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            for (&j, &v) in row {
                if j < i {
                    l_cols.push(j);
                    l_vals.push(v);
                } else {
                    u_cols.push(j);
                    u_vals.push(v);
                }
            }
            l_offsets.push(l_cols.len());
            u_offsets.push(u_cols.len());
        }
        Self { n, l_offsets, l_cols, l_vals, u_offsets, u_cols, u_vals, modified, label }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_modified(&self) -> bool {
        self.modified
    }

    pub fn nnz(&self) -> usize {
        self.l_vals.len() + self.u_vals.len()
    }

    /// Solve L U x = b by forward then backward substitution.
    pub fn solve_into(&self, b: &[f64], x: &mut [f64]) {
        debug_assert_eq!(b.len(), self.n);
        x.copy_from_slice(b);
        // L z = b, unit diagonal
        for i in 0..self.n {
            let mut acc = x[i];
            for idx in self.l_offsets[i]..self.l_offsets[i + 1] {
                acc -= self.l_vals[idx] * x[self.l_cols[idx]];
            }
            x[i] = acc;
        }
        // U x = z
        for i in (0..self.n).rev() {
            let lo = self.u_offsets[i];
            let hi = self.u_offsets[i + 1];
            let mut acc = x[i];
            // diagonal is the first entry of the U row
            for idx in lo + 1..hi {
                acc -= self.u_vals[idx] * x[self.u_cols[idx]];
            }
            x[i] = acc / self.u_vals[lo];
        }
    }

    /// Entry lookup for tests.
    pub fn l_entry(&self, i: usize, j: usize) -> f64 {
        for idx in self.l_offsets[i]..self.l_offsets[i + 1] {
            if self.l_cols[idx] == j {
                return self.l_vals[idx];
            }
        }
        if i == j {
            1.0
        } else {
            0.0
        }
    }

    pub fn u_entry(&self, i: usize, j: usize) -> f64 {
        for idx in self.u_offsets[i]..self.u_offsets[i + 1] {
            if self.u_cols[idx] == j {
                return self.u_vals[idx];
            }
        }
        0.0
    }
}

impl PreconditionerAction for IluFactors {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        self.solve_into(v, out);
    }

    fn label(&self) -> String {
        self.label.clone()
    }
}

const PIVOT_FLOOR: f64 = 1e-300;

/// ILU(0): incomplete LU on the exact sparsity pattern of `A`.
///
/// For a pattern whose LU fill coincides with itself (diagonal, tridiagonal)
/// the factors are the exact LU. A zero pivot aborts with the offending row.
pub fn ilu0(a: &SparseSymMatrix) -> Result<IluFactors, PrecondError> {
    let n = a.n();
    let mut rows: Vec<BTreeMap<usize, f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let (cols, vals) = a.row(i);
        rows.push(cols.iter().copied().zip(vals.iter().copied()).collect());
    }
    for i in 0..n {
        let row_i = rows[i].clone();
        let mut updated = row_i;
        let lower: Vec<usize> = updated.keys().copied().filter(|&k| k < i).collect();
        for k in lower {
            let ukk = *rows[k].get(&k).unwrap_or(&0.0);
            if ukk.abs() < PIVOT_FLOOR {
                return Err(PrecondError::ZeroPivot { row: k });
            }
            let lik = updated[&k] / ukk;
            updated.insert(k, lik);
            // only positions already in the pattern receive updates
            let upper_k: Vec<(usize, f64)> = rows[k]
                .range(k + 1..)
                .map(|(&j, &v)| (j, v))
                .collect();
            for (j, ukj) in upper_k {
                if let Some(w) = updated.get_mut(&j) {
                    *w -= lik * ukj;
                }
            }
        }
        if updated.get(&i).map_or(true, |d| d.abs() < PIVOT_FLOOR) {
            return Err(PrecondError::ZeroPivot { row: i });
        }
        rows[i] = updated;
    }
    Ok(IluFactors::from_rows(n, rows, false, "ilu0".into()))
}

/// Thresholded incomplete LU with optional modified (MILU) lumping.
///
/// Entries with magnitude below `drop_tol` times the 2-norm of the row of `A`
/// are dropped, both before elimination and among computed entries; with
/// `modified` set, every dropped value is added to the diagonal entry of U
/// for that row (row-sum preservation). The diagonal itself is never dropped.
pub fn ilut(
    a: &SparseSymMatrix,
    drop_tol: f64,
    modified: bool,
) -> Result<IluFactors, PrecondError> {
    let n = a.n();
    let mut rows: Vec<BTreeMap<usize, f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let (cols, vals) = a.row(i);
        let norm = vals.iter().map(|v| v * v).sum::<f64>().sqrt();
        let threshold = drop_tol * norm;

        let mut w: BTreeMap<usize, f64> = BTreeMap::new();
        let mut diag_add = 0.0;
        for (&j, &v) in cols.iter().zip(vals) {
            if j != i && v.abs() < threshold {
                if modified {
                    diag_add += v;
                }
            } else {
                w.insert(j, v);
            }
        }

        // ascending elimination over k < i; fills only appear at columns
        // beyond the current k, so a cursor visits each column once
        let mut last_k: Option<usize> = None;
        loop {
            let lo = last_k.map_or(0, |k| k + 1);
            let k = match w.range(lo..i).next().map(|(&k, _)| k) {
                Some(k) => k,
                None => break,
            };
            last_k = Some(k);
            let raw = w.remove(&k).unwrap();
            if raw == 0.0 {
                continue;
            }
            let ukk = *rows[k].get(&k).unwrap_or(&0.0);
            if ukk.abs() < PIVOT_FLOOR {
                return Err(PrecondError::ZeroPivot { row: k });
            }
            let lik = raw / ukk;
            if lik.abs() < threshold {
                if modified {
                    diag_add += lik;
                }
                continue;
            }
            let upper_k: Vec<(usize, f64)> =
                rows[k].range(k + 1..).map(|(&j, &v)| (j, v)).collect();
            for (j, ukj) in upper_k {
                *w.entry(j).or_insert(0.0) -= lik * ukj;
            }
            w.insert(k, lik);
        }

        // drop small computed entries (fills and updated originals)
        let to_drop: Vec<usize> = w
            .iter()
            .filter(|(&j, v)| j != i && v.abs() < threshold)
            .map(|(&j, _)| j)
            .collect();
        for j in to_drop {
            let v = w.remove(&j).unwrap();
            if modified {
                diag_add += v;
            }
        }
        let diag = w.entry(i).or_insert(0.0);
        *diag += diag_add;
        if diag.abs() < PIVOT_FLOOR {
            return Err(PrecondError::ZeroPivot { row: i });
        }
        rows.push(w);
    }
    let label = if modified {
        format!("milu:{:e}", drop_tol)
    } else {
        format!("ilut:{:e}", drop_tol)
    };
    Ok(IluFactors::from_rows(n, rows, modified, label))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ilu0_diagonal_is_exact() {
        let a = SparseSymMatrix::diagonal(&[2.0, 3.0]);
        let f = ilu0(&a).unwrap();
        assert_eq!(f.l_entry(1, 0), 0.0);
        assert_eq!(f.u_entry(0, 0), 2.0);
        assert_eq!(f.u_entry(1, 1), 3.0);
    }

    #[test]
    fn ilu0_two_by_two() {
        // [[4,1],[1,4]] -> L = [[1,0],[.25,1]], U = [[4,1],[0,3.75]]
        let a =
            SparseSymMatrix::from_lower_triplets(2, &[(0, 0, 4.0), (1, 0, 1.0), (1, 1, 4.0)])
                .unwrap();
        let f = ilu0(&a).unwrap();
        assert!((f.l_entry(1, 0) - 0.25).abs() < 1e-15);
        assert!((f.u_entry(0, 0) - 4.0).abs() < 1e-15);
        assert!((f.u_entry(0, 1) - 1.0).abs() < 1e-15);
        assert!((f.u_entry(1, 1) - 3.75).abs() < 1e-15);
    }

    #[test]
    fn ilu0_zero_pivot_reports_row() {
        let a = SparseSymMatrix::from_lower_triplets(2, &[(1, 0, 1.0)]).unwrap();
        match ilu0(&a) {
            Err(PrecondError::ZeroPivot { row }) => assert_eq!(row, 0),
            other => panic!("expected zero pivot, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn ilut_no_dropping_matches_ilu0() {
        let a = SparseSymMatrix::from_lower_triplets(
            3,
            &[(0, 0, 4.0), (1, 0, -1.0), (1, 1, 4.0), (2, 1, -1.0), (2, 2, 4.0)],
        )
        .unwrap();
        let f0 = ilu0(&a).unwrap();
        let ft = ilut(&a, 0.0, false).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((f0.l_entry(i, j) - ft.l_entry(i, j)).abs() < 1e-15);
                assert!((f0.u_entry(i, j) - ft.u_entry(i, j)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn ilut_identity_under_heavy_dropping() {
        let a = SparseSymMatrix::identity(4);
        let f = ilut(&a, 0.5, true).unwrap();
        for i in 0..4 {
            assert_eq!(f.u_entry(i, i), 1.0);
        }
        assert_eq!(f.nnz(), 4);
    }

    #[test]
    fn milu_lumps_dropped_mass_into_diagonal() {
        // [[4, 0.01], [0.01, 4]], tol 0.1: off-diagonals drop into the
        // diagonal, preserving row sums.
        let a = SparseSymMatrix::from_lower_triplets(
            2,
            &[(0, 0, 4.0), (1, 0, 0.01), (1, 1, 4.0)],
        )
        .unwrap();
        let f = ilut(&a, 0.1, true).unwrap();
        assert!((f.u_entry(0, 0) - 4.01).abs() < 1e-15);
        assert!((f.u_entry(1, 1) - 4.01).abs() < 1e-15);
        assert_eq!(f.u_entry(0, 1), 0.0);
        assert_eq!(f.l_entry(1, 0), 0.0);
    }

    #[test]
    fn solve_inverts_exact_factorization() {
        // tridiagonal: no fill, so ILU(0) solves exactly
        let a = SparseSymMatrix::from_lower_triplets(
            3,
            &[(0, 0, 2.0), (1, 0, -1.0), (1, 1, 2.0), (2, 1, -1.0), (2, 2, 2.0)],
        )
        .unwrap();
        let f = ilu0(&a).unwrap();
        let b = [1.0, 0.0, 1.0];
        let mut x = [0.0; 3];
        f.solve_into(&b, &mut x);
        let xv = crate::sparse::DenseVector::new(x.to_vec()).unwrap();
        let ax = a.matvec(&xv).unwrap();
        for i in 0..3 {
            assert!((ax[i] - b[i]).abs() < 1e-12);
        }
    }
}
