use super::{FailureKind, LinearOperator, SolveConfig, SolveReport};
use crate::precond::PreconditionerAction;
use crate::sparse::{axpy, dot, norm2};

/// Preconditioned conjugate gradients on an SPD operator, tolerant of a
/// symmetric *indefinite* preconditioner.
///
/// The recurrences are textbook PCG; with indefinite `M` they coincide with
/// CG formulated in the indefinite M-inner product, which stays a valid
/// projection method as long as the operator itself is positive definite.
/// The scalar `r^T z` may legitimately change sign, so only `p^T W p` is
/// guarded: a vanishing denominator signals that the operator is not SPD.
pub fn pcg(
    op: &dyn LinearOperator,
    precond: &dyn PreconditionerAction,
    b: &[f64],
    cfg: &SolveConfig,
) -> (Vec<f64>, SolveReport) {
    pcg_observed(op, precond, b, cfg, |_| {})
}

/// [`pcg`] with an observer invoked on every iterate; lets property tests
/// track the energy-norm error trajectory without touching the solver.
pub fn pcg_observed(
    op: &dyn LinearOperator,
    precond: &dyn PreconditionerAction,
    b: &[f64],
    cfg: &SolveConfig,
    mut observe: impl FnMut(&[f64]),
) -> (Vec<f64>, SolveReport) {
    let n = op.dim();
    assert_eq!(b.len(), n, "rhs length {} does not match operator dimension {}", b.len(), n);
    let mut report = SolveReport::new();
    let mut x = cfg.x0.clone().unwrap_or_else(|| vec![0.0; n]);
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        report.converged = true;
        report.true_residual_history.push(0.0);
        return (vec![0.0; n], report);
    }

    let mut r = b.to_vec();
    if cfg.x0.is_some() {
        let ax = op.apply(&x);
        axpy(-1.0, &ax, &mut r);
    }
    report.true_residual_history.push(norm2(&r) / bnorm);
    if report.true_residual_history[0] <= cfg.rel_tol {
        report.converged = true;
        return (x, report);
    }

    let mut z = precond.apply(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);

    for iter in 1..=cfg.max_iters {
        let wp = op.apply(&p);
        let pwp = dot(&p, &wp);
        let pp = dot(&p, &p);
        if !pwp.is_finite() || pwp.abs() < 1e-300 * pp {
            report.failure_kind = FailureKind::ScalarBreakdown;
            report.outer_iters = (iter - 1) as f64;
            return (x, report);
        }
        let alpha = rz / pwp;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &wp, &mut r);
        observe(&x);

        let rel = norm2(&r) / bnorm;
        report.true_residual_history.push(rel);
        report.outer_iters = iter as f64;
        if !rel.is_finite() {
            report.failure_kind = FailureKind::ScalarBreakdown;
            return (x, report);
        }
        if rel <= cfg.rel_tol {
            report.converged = true;
            return (x, report);
        }

        precond.apply_into(&r, &mut z);
        let rz_new = dot(&r, &z);
        if !rz_new.is_finite() || rz_new == 0.0 {
            report.failure_kind = FailureKind::ScalarBreakdown;
            return (x, report);
        }
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    report.failure_kind = FailureKind::MaxIters;
    (x, report)
}
