use std::collections::BTreeMap;

use super::ordering::min_degree_order;
use super::{PrecondError, PreconditionerAction};
use crate::sparse::SparseSymMatrix;

/// A diagonal block of the block LDL^T factorization: a scalar or a
/// symmetric 2x2 block (alpha, beta; beta, gamma).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DiagBlock {
    Scalar(f64),
    Block2 { alpha: f64, beta: f64, gamma: f64 },
}

impl DiagBlock {
    /// Eigenvalues of the block (lambda1, lambda2 for 2x2; value once for 1x1).
    pub fn eigenvalues(&self) -> (f64, Option<f64>) {
        match *self {
            DiagBlock::Scalar(d) => (d, None),
            DiagBlock::Block2 { alpha, beta, gamma } => {
                let mean = 0.5 * (alpha + gamma);
                let disc = (0.5 * (alpha - gamma)).hypot(beta);
                (mean - disc, Some(mean + disc))
            }
        }
    }
}

/// Block LDL^T factors of `P A P^T` (complete or incomplete), with optional
/// symmetric equilibration folded in.
///
/// `perm[new] = old`: row `new` of the permuted matrix is row `perm[new]` of
/// `A`. L is unit lower triangular in permuted indices; D is the ordered
/// list of pivot blocks. When `scale` is present the factors approximate
/// `S (P A P^T) S` with `S = diag(scale[perm[i]])`.
#[derive(Debug, Clone)]
pub struct BlockLDLFactors {
    n: usize,
    perm: Vec<usize>,
    l_offsets: Vec<usize>,
    l_cols: Vec<usize>,
    l_vals: Vec<f64>,
    d_blocks: Vec<DiagBlock>,
    scale: Option<Vec<f64>>, // in original index space
    fill_level: usize,
    drop_tol: f64,
    is_complete: bool,
    label: String,
}

/// Factorization options; `ildlt` and `ildlt_complete` wrap the common cases.
#[derive(Debug, Clone)]
pub struct IldltOptions {
    pub fill_level: usize,
    pub drop_tol: f64,
    /// Fill-reducing minimum-degree preorder.
    pub reorder: bool,
    /// Symmetric max-norm equilibration before factorizing.
    pub equilibrate: bool,
}

impl Default for IldltOptions {
    fn default() -> Self {
        Self { fill_level: 3, drop_tol: 1e-3, reorder: true, equilibrate: true }
    }
}

// Bunch-Kaufman pivot constant, bounds element growth.
const BK_ALPHA: f64 = 0.6403882032022076; // (1 + sqrt(17)) / 8

/// Incomplete block LDL^T with Bunch-Kaufman 1x1/2x2 pivoting.
///
/// Level-of-fill dropping is applied structurally (original entries are
/// level 0, fill gets `level(i,k) + level(k,j) + 1`), then multipliers below
/// `drop_tol` times the 2-norm of their pivot column are discarded.
pub fn ildlt(
    a: &SparseSymMatrix,
    fill_level: usize,
    drop_tol: f64,
) -> Result<BlockLDLFactors, PrecondError> {
    ildlt_with_options(a, &IldltOptions { fill_level, drop_tol, ..Default::default() })
}

/// Complete factorization: no dropping, no equilibration, reorder only.
/// Satisfies `P A P^T = L D L^T` up to roundoff.
pub fn ildlt_complete(a: &SparseSymMatrix) -> Result<BlockLDLFactors, PrecondError> {
    ildlt_with_options(
        a,
        &IldltOptions {
            fill_level: usize::MAX,
            drop_tol: 0.0,
            reorder: true,
            equilibrate: false,
        },
    )
}

pub fn ildlt_with_options(
    a: &SparseSymMatrix,
    opts: &IldltOptions,
) -> Result<BlockLDLFactors, PrecondError> {
    let n = a.n();
    let breakdown_tol = 1e-14 * a.frobenius_norm();

    let scale: Option<Vec<f64>> = if opts.equilibrate {
        let mut s = vec![1.0_f64; n];
        for i in 0..n {
            let (_, vals) = a.row(i);
            let m = vals.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
            if m > 0.0 {
                s[i] = 1.0 / m.sqrt();
            }
        }
        Some(s)
    } else {
        None
    };

    let pre: Vec<usize> = if opts.reorder { min_degree_order(a) } else { (0..n).collect() };
    let mut pre_inv = vec![0usize; n];
    for (new, &old) in pre.iter().enumerate() {
        pre_inv[old] = new;
    }

    // Active symmetric matrix over preordered indices: value and fill level.
    let mut active: Vec<BTreeMap<usize, (f64, u32)>> = vec![BTreeMap::new(); n];
    for i in 0..n {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            let sv = match &scale {
                Some(s) => v * s[i] * s[j],
                None => v,
            };
            active[pre_inv[i]].insert(pre_inv[j], (sv, 0));
        }
    }

    let mut alive = vec![true; n];
    let mut next_lead = 0usize;
    let mut order: Vec<usize> = Vec::with_capacity(n); // preordered node per step
    let mut l_columns: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n); // (node, value) per step
    let mut d_blocks: Vec<DiagBlock> = Vec::new();

    let diag_of = |active: &Vec<BTreeMap<usize, (f64, u32)>>, q: usize| -> f64 {
        active[q].get(&q).map_or(0.0, |&(v, _)| v)
    };
    let max_offdiag = |active: &Vec<BTreeMap<usize, (f64, u32)>>,
                       alive: &Vec<bool>,
                       q: usize|
     -> (f64, Option<usize>) {
        let mut best = 0.0_f64;
        let mut arg = None;
        for (&t, &(v, _)) in &active[q] {
            if t != q && alive[t] && v.abs() > best {
                best = v.abs();
                arg = Some(t);
            }
        }
        (best, arg)
    };

    while order.len() < n {
        while !alive[next_lead] {
            next_lead += 1;
        }
        let q0 = next_lead;
        let a11 = diag_of(&active, q0);
        let (omega1, r_opt) = max_offdiag(&active, &alive, q0);

        enum Pivot {
            One(usize),
            Two(usize, usize),
        }
        let pivot = if omega1 == 0.0 {
            if a11.abs() <= breakdown_tol {
                return Err(PrecondError::Breakdown {
                    step: order.len(),
                    threshold: breakdown_tol,
                });
            }
            Pivot::One(q0)
        } else if a11.abs() >= BK_ALPHA * omega1 {
            Pivot::One(q0)
        } else {
            let r = r_opt.unwrap();
            let (omega_r, _) = max_offdiag(&active, &alive, r);
            let arr = diag_of(&active, r);
            if a11.abs() * omega_r >= BK_ALPHA * omega1 * omega1 {
                Pivot::One(q0)
            } else if arr.abs() >= BK_ALPHA * omega_r {
                Pivot::One(r)
            } else {
                Pivot::Two(q0, r)
            }
        };

        match pivot {
            Pivot::One(q) => {
                let d = diag_of(&active, q);
                if d.abs() <= breakdown_tol {
                    return Err(PrecondError::Breakdown {
                        step: order.len(),
                        threshold: breakdown_tol,
                    });
                }
                alive[q] = false;
                order.push(q);
                d_blocks.push(DiagBlock::Scalar(d));

                let col: Vec<(usize, f64, u32)> = active[q]
                    .iter()
                    .filter(|(&t, _)| t != q && alive[t])
                    .map(|(&t, &(v, lev))| (t, v, lev))
                    .collect();
                let mut lcol: Vec<(usize, f64, f64, u32)> =
                    col.iter().map(|&(t, v, lev)| (t, v / d, v, lev)).collect();
                if opts.drop_tol > 0.0 {
                    let norm =
                        lcol.iter().map(|&(_, v, _, _)| v * v).sum::<f64>().sqrt();
                    lcol.retain(|&(_, v, _, _)| v.abs() >= opts.drop_tol * norm);
                }
                // rank-1 Schur update over kept multipliers on both sides,
                // which keeps the active matrix exactly symmetric
                for &(t, lt, _, lev_t) in &lcol {
                    for &(u, _, cu, lev_u) in &lcol {
                        let new_lev = lev_t.saturating_add(lev_u).saturating_add(1);
                        match active[t].get_mut(&u) {
                            Some(entry) => {
                                entry.0 -= lt * cu;
                                entry.1 = entry.1.min(new_lev);
                            }
                            None => {
                                if (new_lev as usize) <= opts.fill_level {
                                    active[t].insert(u, (-lt * cu, new_lev));
                                }
                            }
                        }
                    }
                }
                l_columns.push(lcol.into_iter().map(|(t, v, _, _)| (t, v)).collect());
                // detach pivot row
                let row: Vec<usize> = active[q].keys().copied().collect();
                for t in row {
                    if t != q {
                        active[t].remove(&q);
                    }
                }
                active[q].clear();
            }
            Pivot::Two(q1, q2) => {
                let a_ = diag_of(&active, q1);
                let c_ = diag_of(&active, q2);
                let b_ = active[q1].get(&q2).map_or(0.0, |&(v, _)| v);
                let det = a_ * c_ - b_ * b_;
                if det.abs() <= breakdown_tol * breakdown_tol {
                    return Err(PrecondError::Breakdown {
                        step: order.len(),
                        threshold: breakdown_tol,
                    });
                }
                alive[q1] = false;
                alive[q2] = false;
                order.push(q1);
                order.push(q2);
                d_blocks.push(DiagBlock::Block2 { alpha: a_, beta: b_, gamma: c_ });

                // union of the two pivot columns over surviving nodes
                let mut nbrs: BTreeMap<usize, (f64, f64, u32)> = BTreeMap::new();
                for (&t, &(v, lev)) in &active[q1] {
                    if alive[t] {
                        let e = nbrs.entry(t).or_insert((0.0, 0.0, u32::MAX));
                        e.0 = v;
                        e.2 = e.2.min(lev);
                    }
                }
                for (&t, &(v, lev)) in &active[q2] {
                    if alive[t] {
                        let e = nbrs.entry(t).or_insert((0.0, 0.0, u32::MAX));
                        e.1 = v;
                        e.2 = e.2.min(lev);
                    }
                }
                let col: Vec<(usize, f64, f64, u32)> =
                    nbrs.into_iter().map(|(t, (c1, c2, lev))| (t, c1, c2, lev)).collect();
                // multipliers [l1 l2] = [c1 c2] * inv([[a,b],[b,c]])
                let mut lcol: Vec<(usize, f64, f64, u32)> = col
                    .iter()
                    .map(|&(t, c1, c2, lev)| {
                        let l1 = (c1 * c_ - c2 * b_) / det;
                        let l2 = (c2 * a_ - c1 * b_) / det;
                        (t, l1, l2, lev)
                    })
                    .collect();
                if opts.drop_tol > 0.0 {
                    let norm = lcol
                        .iter()
                        .map(|&(_, l1, l2, _)| l1 * l1 + l2 * l2)
                        .sum::<f64>()
                        .sqrt();
                    lcol.retain(|&(_, l1, l2, _)| l1.hypot(l2) >= opts.drop_tol * norm);
                }
                let kept: std::collections::BTreeSet<usize> =
                    lcol.iter().map(|&(t, _, _, _)| t).collect();
                for &(t, l1, l2, lev_t) in &lcol {
                    for &(u, c1u, c2u, lev_u) in &col {
                        if !kept.contains(&u) {
                            continue;
                        }
                        let delta = l1 * c1u + l2 * c2u;
                        let new_lev = lev_t.saturating_add(lev_u).saturating_add(1);
                        match active[t].get_mut(&u) {
                            Some(entry) => {
                                entry.0 -= delta;
                                entry.1 = entry.1.min(new_lev);
                            }
                            None => {
                                if (new_lev as usize) <= opts.fill_level {
                                    active[t].insert(u, (-delta, new_lev));
                                }
                            }
                        }
                    }
                }
                l_columns.push(lcol.iter().map(|&(t, l1, _, _)| (t, l1)).collect());
                l_columns.push(lcol.iter().map(|&(t, _, l2, _)| (t, l2)).collect());
                for q in [q1, q2] {
                    let row: Vec<usize> = active[q].keys().copied().collect();
                    for t in row {
                        if t != q {
                            active[t].remove(&q);
                        }
                    }
                    active[q].clear();
                }
            }
        }
    }

    // step index of each preordered node
    let mut step_of = vec![0usize; n];
    for (s, &node) in order.iter().enumerate() {
        step_of[node] = s;
    }
    // assemble L rows (strictly lower in step indices)
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (s, col) in l_columns.iter().enumerate() {
        for &(node, v) in col {
            rows[step_of[node]].push((s, v));
        }
    }
    let mut l_offsets = vec![0usize];
    let mut l_cols = Vec::new();
    let mut l_vals = Vec::new();
    for row in &mut rows {
        row.sort_by_key(|&(j, _)| j);
        for &(j, v) in row.iter() {
            l_cols.push(j);
            l_vals.push(v);
        }
        l_offsets.push(l_cols.len());
    }

    let perm: Vec<usize> = order.iter().map(|&node| pre[node]).collect();
    let is_complete = opts.fill_level >= n && opts.drop_tol == 0.0;
    let label = if is_complete {
        "ldlt".to_string()
    } else {
        format!("ildlt:{}:{:e}", opts.fill_level, opts.drop_tol)
    };
    Ok(BlockLDLFactors {
        n,
        perm,
        l_offsets,
        l_cols,
        l_vals,
        d_blocks,
        scale,
        fill_level: opts.fill_level,
        drop_tol: opts.drop_tol,
        is_complete,
        label,
    })
}

impl BlockLDLFactors {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn d_blocks(&self) -> &[DiagBlock] {
        &self.d_blocks
    }

    pub fn fill_level(&self) -> usize {
        self.fill_level
    }

    pub fn drop_tol(&self) -> f64 {
        self.drop_tol
    }

    pub fn is_complete(&self) -> bool {
        self.is_complete
    }

    pub fn l_nnz(&self) -> usize {
        self.l_vals.len()
    }

    /// Solve `A x = b` through the factors (approximately when incomplete).
    pub fn solve_into(&self, b: &[f64], x: &mut [f64]) {
        debug_assert_eq!(b.len(), self.n);
        let mut w: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        if let Some(s) = &self.scale {
            for (wi, &p) in w.iter_mut().zip(&self.perm) {
                *wi *= s[p];
            }
        }
        // forward: L z = w
        for i in 0..self.n {
            let mut acc = w[i];
            for idx in self.l_offsets[i]..self.l_offsets[i + 1] {
                acc -= self.l_vals[idx] * w[self.l_cols[idx]];
            }
            w[i] = acc;
        }
        // block diagonal solve
        let mut i = 0;
        let mut blk = 0;
        while i < self.n {
            match self.d_blocks[blk] {
                DiagBlock::Scalar(d) => {
                    w[i] /= d;
                    i += 1;
                }
                DiagBlock::Block2 { alpha, beta, gamma } => {
                    let det = alpha * gamma - beta * beta;
                    let (z1, z2) = (w[i], w[i + 1]);
                    w[i] = (gamma * z1 - beta * z2) / det;
                    w[i + 1] = (alpha * z2 - beta * z1) / det;
                    i += 2;
                }
            }
            blk += 1;
        }
        // backward: L^T y = u, column-oriented over rows of L
        for i in (0..self.n).rev() {
            let yi = w[i];
            for idx in self.l_offsets[i]..self.l_offsets[i + 1] {
                w[self.l_cols[idx]] -= self.l_vals[idx] * yi;
            }
        }
        if let Some(s) = &self.scale {
            for (wi, &p) in w.iter_mut().zip(&self.perm) {
                *wi *= s[p];
            }
        }
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = w[i];
        }
    }

    /// Dense `L` (unit diagonal), for tests.
    pub fn l_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut l = nalgebra::DMatrix::identity(self.n, self.n);
        for i in 0..self.n {
            for idx in self.l_offsets[i]..self.l_offsets[i + 1] {
                l[(i, self.l_cols[idx])] = self.l_vals[idx];
            }
        }
        l
    }

    /// Dense `D`, for tests.
    pub fn d_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut d = nalgebra::DMatrix::zeros(self.n, self.n);
        let mut i = 0;
        for blk in &self.d_blocks {
            match *blk {
                DiagBlock::Scalar(v) => {
                    d[(i, i)] = v;
                    i += 1;
                }
                DiagBlock::Block2 { alpha, beta, gamma } => {
                    d[(i, i)] = alpha;
                    d[(i, i + 1)] = beta;
                    d[(i + 1, i)] = beta;
                    d[(i + 1, i + 1)] = gamma;
                    i += 2;
                }
            }
        }
        d
    }

    /// Dense reconstruction of the approximation to `P A P^T`
    /// (equilibration undone), for the completeness invariant.
    pub fn reconstruct_permuted(&self) -> nalgebra::DMatrix<f64> {
        let l = self.l_dense();
        let mut m = &l * self.d_dense() * l.transpose();
        if let Some(s) = &self.scale {
            for i in 0..self.n {
                for j in 0..self.n {
                    m[(i, j)] /= s[self.perm[i]] * s[self.perm[j]];
                }
            }
        }
        m
    }
}

impl PreconditionerAction for BlockLDLFactors {
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

/// Replace the block diagonal `D` by the positive definite `|D|`:
/// scalars by their absolute values, 2x2 blocks by the recomposition with
/// the eigenvalue magnitudes through the same rotation. `L`, the
/// permutation and the scaling stay untouched, so `L |D| L^T` is positive
/// definite with the same magnitudes in its spectrum.
pub fn modify_block_diagonal(f: &BlockLDLFactors) -> Result<BlockLDLFactors, PrecondError> {
    let mut max_eig = 0.0_f64;
    for blk in &f.d_blocks {
        let (l1, l2) = blk.eigenvalues();
        max_eig = max_eig.max(l1.abs());
        if let Some(l2) = l2 {
            max_eig = max_eig.max(l2.abs());
        }
    }
    let floor = 1e-14 * max_eig;
    let mut out = f.clone();
    for (idx, blk) in out.d_blocks.iter_mut().enumerate() {
        match *blk {
            DiagBlock::Scalar(d) => {
                if d.abs() < floor {
                    return Err(PrecondError::SingularBlock { block: idx });
                }
                *blk = DiagBlock::Scalar(d.abs());
            }
            DiagBlock::Block2 { alpha, beta, gamma } => {
                let mean = 0.5 * (alpha + gamma);
                let disc = (0.5 * (alpha - gamma)).hypot(beta);
                let l1 = mean + disc;
                let l2 = mean - disc;
                if l1.abs() < floor || l2.abs() < floor {
                    return Err(PrecondError::SingularBlock { block: idx });
                }
                if beta == 0.0 {
                    *blk = DiagBlock::Block2 { alpha: alpha.abs(), beta: 0.0, gamma: gamma.abs() };
                    continue;
                }
                // rotation [[c, s], [s, -c]] with (c, s) the unit eigenvector
                // for l1; recompose with |l1|, |l2|.
                let t = (l1 - alpha) / beta;
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let (a1, a2) = (l1.abs(), l2.abs());
                *blk = DiagBlock::Block2 {
                    alpha: c * c * a1 + s * s * a2,
                    beta: c * s * (a1 - a2),
                    gamma: s * s * a1 + c * c * a2,
                };
            }
        }
    }
    out.label = format!("{}-mod", f.label);
    Ok(out)
}
