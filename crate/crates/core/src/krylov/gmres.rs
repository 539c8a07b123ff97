use super::{residual_norm, stagnated, FailureKind, LinearOperator, SolveConfig, SolveReport};
use crate::precond::PreconditionerAction;
use crate::sparse::{axpy, dot, norm2};

// Least-squares machinery shared by GMRES and FGMRES: Hessenberg column,
// Givens rotations, candidate solution.
struct ArnoldiLS {
    m: usize,
    h: Vec<Vec<f64>>, // columns, each of length j+2
    cs: Vec<f64>,
    sn: Vec<f64>,
    g: Vec<f64>,
}

impl ArnoldiLS {
    fn new(m: usize, beta: f64) -> Self {
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        Self { m, h: Vec::with_capacity(m), cs: Vec::with_capacity(m), sn: Vec::with_capacity(m), g }
    }

    /// Push column j (length j+2), apply rotations; returns false when a
    /// scalar went non-finite.
    fn push_column(&mut self, mut col: Vec<f64>) -> bool {
        let j = self.h.len();
        for i in 0..j {
            let tmp = self.cs[i] * col[i] + self.sn[i] * col[i + 1];
            col[i + 1] = -self.sn[i] * col[i] + self.cs[i] * col[i + 1];
            col[i] = tmp;
        }
        let (a, b) = (col[j], col[j + 1]);
        let r = a.hypot(b);
        let (c, s) = if r == 0.0 { (1.0, 0.0) } else { (a / r, b / r) };
        col[j] = r;
        col[j + 1] = 0.0;
        self.cs.push(c);
        self.sn.push(s);
        let gj = self.g[j];
        self.g[j] = c * gj;
        self.g[j + 1] = -s * gj;
        self.h.push(col);
        self.g.iter().all(|v| v.is_finite()) && self.h[j].iter().all(|v| v.is_finite())
    }

    /// Solve the (j+1) x (j+1) triangular system for the current y.
    fn solve_y(&self) -> Vec<f64> {
        let j = self.h.len();
        let mut y = vec![0.0; j];
        for i in (0..j).rev() {
            let mut acc = self.g[i];
            for l in i + 1..j {
                acc -= self.h[l][i] * y[l];
            }
            y[i] = acc / self.h[i][i];
        }
        y
    }

    fn full(&self) -> bool {
        self.h.len() == self.m
    }
}

fn combine(x0: &[f64], basis: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let mut x = x0.to_vec();
    for (yi, v) in y.iter().zip(basis) {
        axpy(*yi, v, &mut x);
    }
    x
}

/// Left-preconditioned restarted GMRES(m) with true-residual stopping.
///
/// The Arnoldi recurrence runs on `M^{-1} A`, but at every step the candidate
/// iterate is formed and the unpreconditioned residual `||b - A x||` is
/// computed explicitly; all stopping and history reporting is in terms of it.
/// The report carries the (cycle, step) pair and the flattened total
/// `(o - 1) m + i`.
pub fn gmres_restarted(
    op: &dyn LinearOperator,
    precond: &dyn PreconditionerAction,
    b: &[f64],
    cfg: &SolveConfig,
) -> (Vec<f64>, SolveReport) {
    let n = op.dim();
    assert_eq!(b.len(), n);
    let m = cfg.restart.max(1);
    let mut report = SolveReport::new();
    let mut x = cfg.x0.clone().unwrap_or_else(|| vec![0.0; n]);
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        report.converged = true;
        report.true_residual_history.push(0.0);
        return (vec![0.0; n], report);
    }
    let mut buf = vec![0.0; n];
    report.true_residual_history.push(residual_norm(op, &x, b, &mut buf) / bnorm);
    if report.true_residual_history[0] <= cfg.rel_tol {
        report.converged = true;
        return (x, report);
    }

    let mut total = 0usize;
    let mut cycle = 0usize;
    loop {
        cycle += 1;
        op.apply_into(&x, &mut buf);
        let mut r = b.to_vec();
        axpy(-1.0, &buf, &mut r);
        let z = precond.apply(&r);
        let beta = norm2(&z);
        if beta == 0.0 || !beta.is_finite() {
            report.failure_kind = FailureKind::ScalarBreakdown;
            report.gmres_cycles = Some((cycle, 0));
            report.outer_iters = total as f64;
            return (x, report);
        }
        let mut basis: Vec<Vec<f64>> = vec![z.iter().map(|v| v / beta).collect()];
        let mut ls = ArnoldiLS::new(m, beta);

        while !ls.full() {
            let j = ls.h.len();
            total += 1;
            op.apply_into(&basis[j], &mut buf);
            let mut w = precond.apply(&buf);
            let mut col = vec![0.0; j + 2];
            for (i, v) in basis.iter().enumerate() {
                let hij = dot(&w, v);
                col[i] = hij;
                axpy(-hij, v, &mut w);
            }
            let hnext = norm2(&w);
            col[j + 1] = hnext;
            let lucky = hnext < 1e-14 * beta;
            if !ls.push_column(col) {
                report.failure_kind = FailureKind::ScalarBreakdown;
                report.gmres_cycles = Some((cycle, j + 1));
                report.outer_iters = total as f64;
                return (x, report);
            }
            if !lucky {
                basis.push(w.iter().map(|v| v / hnext).collect());
            }

            let y = ls.solve_y();
            let cand = combine(&x, &basis[..y.len()], &y);
            let rel = residual_norm(op, &cand, b, &mut buf) / bnorm;
            report.true_residual_history.push(rel);
            report.gmres_cycles = Some((cycle, j + 1));
            report.outer_iters = ((cycle - 1) * m + j + 1) as f64;
            if rel <= cfg.rel_tol {
                report.converged = true;
                return (cand, report);
            }
            if stagnated(&report.true_residual_history) {
                report.failure_kind = FailureKind::Stagnation;
                return (cand, report);
            }
            if total >= cfg.max_iters {
                report.failure_kind = FailureKind::MaxIters;
                return (cand, report);
            }
            if lucky {
                // preconditioned Krylov space exhausted; restart from here
                x = cand;
                break;
            }
            if ls.full() {
                x = cand;
            }
        }
    }
}

/// Inner-outer FGMRES-GMRES: flexible outer GMRES whose preconditioning
/// step is itself a restarted GMRES solve of `A z = v` with the supplied
/// preconditioner, run to `cfg.inner_tol`.
///
/// With `inner_tol <= 0` the inner solve is disabled and the preconditioner
/// is applied directly, which reduces the scheme to restarted GMRES on the
/// same operator. Inner iterations are charged against `cfg.max_iters`
/// together with the outer ones.
pub fn fgmres_gmres(
    op: &dyn LinearOperator,
    precond: &dyn PreconditionerAction,
    b: &[f64],
    cfg: &SolveConfig,
) -> (Vec<f64>, SolveReport) {
    let n = op.dim();
    assert_eq!(b.len(), n);
    let m = cfg.restart.max(1);
    let mut report = SolveReport::new();
    let mut x = cfg.x0.clone().unwrap_or_else(|| vec![0.0; n]);
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        report.converged = true;
        report.true_residual_history.push(0.0);
        return (vec![0.0; n], report);
    }
    let mut buf = vec![0.0; n];
    report.true_residual_history.push(residual_norm(op, &x, b, &mut buf) / bnorm);
    if report.true_residual_history[0] <= cfg.rel_tol {
        report.converged = true;
        return (x, report);
    }

    let mut outer_total = 0usize;
    let mut inner_total = 0usize;
    let mut cycle = 0usize;
    loop {
        cycle += 1;
        op.apply_into(&x, &mut buf);
        let mut r = b.to_vec();
        axpy(-1.0, &buf, &mut r);
        let beta = norm2(&r);
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut zs: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut ls = ArnoldiLS::new(m, beta);

        while !ls.full() {
            let j = ls.h.len();
            outer_total += 1;
            // flexible preconditioning: z_j approximately solves A z = v_j
            let z = if cfg.inner_tol > 0.0 {
                let budget = cfg.max_iters.saturating_sub(outer_total + inner_total).max(1);
                let inner_cfg = SolveConfig {
                    rel_tol: cfg.inner_tol,
                    max_iters: cfg.inner_max_iters.min(budget),
                    restart: cfg.restart_inner.max(1),
                    x0: None,
                    ..cfg.clone()
                };
                let (z, inner_rep) = gmres_restarted(op, precond, &basis[j], &inner_cfg);
                inner_total += inner_rep.outer_iters as usize;
                report.inner_iters_per_outer.push(inner_rep.outer_iters as usize);
                z
            } else {
                precond.apply(&basis[j])
            };
            op.apply_into(&z, &mut buf);
            zs.push(z);
            let mut w = buf.clone();
            let mut col = vec![0.0; j + 2];
            for (i, v) in basis.iter().enumerate() {
                let hij = dot(&w, v);
                col[i] = hij;
                axpy(-hij, v, &mut w);
            }
            let hnext = norm2(&w);
            col[j + 1] = hnext;
            let lucky = hnext < 1e-14 * beta;
            if !ls.push_column(col) {
                report.failure_kind = FailureKind::ScalarBreakdown;
                finalize_fgmres(&mut report, cycle, ls.h.len(), m, outer_total, inner_total);
                return (x, report);
            }
            if !lucky {
                basis.push(w.iter().map(|v| v / hnext).collect());
            }

            let y = ls.solve_y();
            let cand = combine(&x, &zs[..y.len()], &y);
            let rel = residual_norm(op, &cand, b, &mut buf) / bnorm;
            report.true_residual_history.push(rel);
            if rel <= cfg.rel_tol {
                report.converged = true;
                finalize_fgmres(&mut report, cycle, j + 1, m, outer_total, inner_total);
                return (cand, report);
            }
            if stagnated(&report.true_residual_history) {
                report.failure_kind = FailureKind::Stagnation;
                finalize_fgmres(&mut report, cycle, j + 1, m, outer_total, inner_total);
                return (cand, report);
            }
            if outer_total + inner_total >= cfg.max_iters {
                report.failure_kind = FailureKind::MaxIters;
                finalize_fgmres(&mut report, cycle, j + 1, m, outer_total, inner_total);
                return (cand, report);
            }
            if lucky {
                x = cand;
                break;
            }
            if ls.full() {
                x = cand;
            }
        }
    }
}

fn finalize_fgmres(
    report: &mut SolveReport,
    cycle: usize,
    step: usize,
    _m: usize,
    outer_total: usize,
    inner_total: usize,
) {
    report.gmres_cycles = Some((cycle, step));
    report.outer_iters = outer_total as f64;
    report.inner_iters_total = inner_total;
    report.inner_iters_avg =
        if outer_total > 0 { inner_total as f64 / outer_total as f64 } else { 0.0 };
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::precond::{ilu0, IdentityPrecond};
    use crate::sparse::SparseSymMatrix;

    #[test]
    fn identity_one_step() {
        let a = SparseSymMatrix::identity(4);
        let cfg = SolveConfig { restart: 5, ..Default::default() };
        let (x, rep) = gmres_restarted(&a, &IdentityPrecond::new(4), &[1.0, 2.0, 3.0, 4.0], &cfg);
        assert!(rep.converged);
        assert_eq!(rep.gmres_cycles, Some((1, 1)));
        assert_eq!(rep.gmres_flattened(5), Some(1));
        assert!((x[0] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn three_eigenvalues_full_gmres_bound() {
        // minimal-polynomial bound: with the basis not truncated (m >= 3)
        // three distinct eigenvalues take at most three steps
        let a = SparseSymMatrix::diagonal(&[1.0, 2.0, 3.0]);
        let cfg = SolveConfig { restart: 3, rel_tol: 1e-10, ..Default::default() };
        let (x, rep) = gmres_restarted(&a, &IdentityPrecond::new(3), &[1.0, 1.0, 1.0], &cfg);
        assert!(rep.converged);
        assert!(rep.gmres_flattened(3).unwrap() <= 3);
        assert!((x[0] - 1.0).abs() < 1e-8);
        assert!((x[1] - 0.5).abs() < 1e-8);
        assert!((x[2] - 1.0 / 3.0).abs() < 1e-8);
    }

    #[test]
    fn three_eigenvalues_restarted_flattening_consistent() {
        // with m = 2 the bound no longer applies; the run still converges
        // and the o(i) split must flatten consistently
        let a = SparseSymMatrix::diagonal(&[1.0, 2.0, 3.0]);
        let cfg = SolveConfig { restart: 2, rel_tol: 1e-10, ..Default::default() };
        let (x, rep) = gmres_restarted(&a, &IdentityPrecond::new(3), &[1.0, 1.0, 1.0], &cfg);
        assert!(rep.converged);
        let (o, i) = rep.gmres_cycles.unwrap();
        assert!(i >= 1 && i <= 2);
        assert_eq!(rep.gmres_flattened(2).unwrap(), (o - 1) * 2 + i);
        assert_eq!(rep.outer_iters as usize, (o - 1) * 2 + i);
        assert!((x[2] - 1.0 / 3.0).abs() < 1e-8);
    }

    #[test]
    fn flattening_convention() {
        let rep = {
            let mut r = SolveReport::new();
            r.gmres_cycles = Some((7, 103));
            r
        };
        assert_eq!(rep.gmres_flattened(120), Some(823));
    }

    #[test]
    fn restart_cycles_are_counted() {
        // Laplacian needs more than m=3 steps, forcing restarts.
        let a = crate::synth::laplacian_2d(5);
        let n = a.n();
        let b: Vec<f64> = (0..n).map(|i| ((i % 3) as f64) - 1.0).collect();
        let cfg =
            SolveConfig { restart: 3, rel_tol: 1e-8, max_iters: 3000, ..Default::default() };
        let (x, rep) = gmres_restarted(&a, &IdentityPrecond::new(n), &b, &cfg);
        assert!(rep.converged);
        let (o, i) = rep.gmres_cycles.unwrap();
        assert!(o > 1);
        assert!(i >= 1 && i <= 3);
        let mut buf = vec![0.0; n];
        let res = residual_norm(&a, &x, &b, &mut buf) / norm2(&b);
        assert!(res <= 1e-8);
    }

    #[test]
    fn max_iters_fails_with_dagger() {
        let a = crate::synth::laplacian_2d(6);
        let n = a.n();
        let b = vec![1.0; n];
        let cfg = SolveConfig { restart: 2, rel_tol: 1e-14, max_iters: 4, ..Default::default() };
        let (_, rep) = gmres_restarted(&a, &IdentityPrecond::new(n), &b, &cfg);
        assert!(!rep.converged);
        assert_eq!(rep.failure_kind, FailureKind::MaxIters);
        assert_eq!(rep.status_marker(), "†");
    }

    #[test]
    fn fgmres_identity_trivial() {
        let a = SparseSymMatrix::identity(3);
        let cfg = SolveConfig { restart: 4, inner_tol: 1e-2, ..Default::default() };
        let (x, rep) = fgmres_gmres(&a, &IdentityPrecond::new(3), &[2.0, 4.0, 6.0], &cfg);
        assert!(rep.converged);
        assert_eq!(rep.gmres_cycles.unwrap().0, 1);
        assert!((x[1] - 4.0).abs() < 1e-9);
    }

    #[test]
    fn fgmres_disabled_inner_matches_gmres_solution() {
        let (a, _, _) = crate::synth::random_indefinite(30, 0, 42);
        // SPD instance (k = 0), ILU preconditioner
        let f = ilu0(&a).unwrap();
        let b: Vec<f64> = (0..30).map(|i| (i as f64 * 0.31).sin()).collect();
        let cfg = SolveConfig {
            restart: 10,
            rel_tol: 1e-9,
            inner_tol: 0.0,
            max_iters: 2000,
            ..Default::default()
        };
        let (xf, repf) = fgmres_gmres(&a, &f, &b, &cfg);
        let (xg, repg) = gmres_restarted(&a, &f, &b, &cfg);
        assert!(repf.converged && repg.converged);
        for (u, v) in xf.iter().zip(&xg) {
            assert!((u - v).abs() < 1e-8, "solutions differ: {} vs {}", u, v);
        }
    }

    #[test]
    fn fgmres_spd_50_matches_gmres_solution() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let n = 50;
        let mut rng = ChaCha8Rng::seed_from_u64(650);
        let eigs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..5.0)).collect();
        let (a, _) = crate::synth::planted_symmetric(&eigs, 651);
        let f = ilu0(&a).unwrap();
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let cfg = SolveConfig {
            restart: 15,
            restart_inner: 15,
            rel_tol: 1e-10,
            inner_tol: 1e-2,
            max_iters: 5000,
            ..Default::default()
        };
        let (xf, repf) = fgmres_gmres(&a, &f, &b, &cfg);
        let (xg, repg) = gmres_restarted(&a, &f, &b, &cfg);
        assert!(repf.converged && repg.converged);
        let scale = norm2(&xg);
        for (u, v) in xf.iter().zip(&xg) {
            assert!((u - v).abs() <= 1e-8 * scale.max(1.0), "{} vs {}", u, v);
        }
    }

    #[test]
    fn fgmres_inner_outer_converges_and_counts() {
        let (a, _, _) = crate::synth::random_indefinite(40, 3, 77);
        let f = ilu0(&a).unwrap();
        let b: Vec<f64> = (0..40).map(|i| (i as f64 * 0.13).cos()).collect();
        let cfg = SolveConfig {
            restart: 20,
            restart_inner: 20,
            rel_tol: 1e-8,
            inner_tol: 1e-2,
            max_iters: 10_000,
            ..Default::default()
        };
        let (x, rep) = fgmres_gmres(&a, &f, &b, &cfg);
        assert!(rep.converged, "failure: {:?}", rep.failure_kind);
        assert!(rep.inner_iters_total > 0);
        assert_eq!(rep.inner_iters_per_outer.len(), rep.outer_iters as usize);
        let mut buf = vec![0.0; 40];
        let res = residual_norm(&a, &x, &b, &mut buf) / norm2(&b);
        assert!(res <= 1e-8);
    }
}
