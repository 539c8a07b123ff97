use super::{residual_norm, stagnated, FailureKind, LinearOperator, SolveConfig, SolveReport};
use crate::precond::PreconditionerAction;
use crate::sparse::{axpy, dot, norm2};

/// Preconditioned MINRES for symmetric operators.
///
/// The preconditioner action must be symmetric positive definite; violations
/// (a nonpositive `z^T r` in the Lanczos recurrence, as happens when the
/// nested inner solve is too inexact) surface as scalar breakdown. Stopping
/// uses the explicitly recomputed true residual; the history holds one entry
/// per iteration plus the initial residual.
pub fn minres(
    op: &dyn LinearOperator,
    precond: &dyn PreconditionerAction,
    b: &[f64],
    cfg: &SolveConfig,
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

    let mut buf = vec![0.0; n];
    let r0 = {
        op.apply_into(&x, &mut buf);
        let mut r = b.to_vec();
        axpy(-1.0, &buf, &mut r);
        r
    };
    report.true_residual_history.push(norm2(&r0) / bnorm);
    if report.true_residual_history[0] <= cfg.rel_tol {
        report.converged = true;
        return (x, report);
    }

    let mut v_old = vec![0.0; n];
    let mut v = r0;
    let mut z = precond.apply(&v);
    let gamma_sq = dot(&z, &v);
    if !gamma_sq.is_finite() || gamma_sq <= 0.0 {
        report.failure_kind = FailureKind::ScalarBreakdown;
        return (x, report);
    }
    let mut gamma = gamma_sq.sqrt();
    let mut gamma_old = 1.0;
    let mut eta = gamma;
    let (mut s_old, mut s) = (0.0, 0.0);
    let (mut c_old, mut c) = (1.0, 1.0);
    let mut w = vec![0.0; n];
    let mut w_old = vec![0.0; n];

    for iter in 1..=cfg.max_iters {
        for zi in z.iter_mut() {
            *zi /= gamma;
        }
        let az = op.apply(&z);
        let delta = dot(&az, &z);
        // three-term Lanczos recurrence
        let mut v_new = az;
        axpy(-delta / gamma, &v, &mut v_new);
        axpy(-gamma / gamma_old, &v_old, &mut v_new);
        let z_new = precond.apply(&v_new);
        let gamma_new_sq = dot(&z_new, &v_new);
        if !gamma_new_sq.is_finite() || gamma_new_sq < 0.0 {
            report.failure_kind = FailureKind::ScalarBreakdown;
            report.outer_iters = (iter - 1) as f64;
            return (x, report);
        }
        let gamma_new = gamma_new_sq.sqrt();

        let alpha0 = c * delta - c_old * s * gamma;
        let alpha1 = (alpha0 * alpha0 + gamma_new * gamma_new).sqrt();
        let alpha2 = s * delta + c_old * c * gamma;
        let alpha3 = s_old * gamma;
        if alpha1 == 0.0 || !alpha1.is_finite() {
            report.failure_kind = FailureKind::ScalarBreakdown;
            report.outer_iters = (iter - 1) as f64;
            return (x, report);
        }
        let c_new = alpha0 / alpha1;
        let s_new = gamma_new / alpha1;
        let mut w_new = z.clone();
        axpy(-alpha3, &w_old, &mut w_new);
        axpy(-alpha2, &w, &mut w_new);
        for wi in w_new.iter_mut() {
            *wi /= alpha1;
        }
        axpy(c_new * eta, &w_new, &mut x);
        eta = -s_new * eta;

        let rel = residual_norm(op, &x, b, &mut buf) / bnorm;
        report.true_residual_history.push(rel);
        report.outer_iters = iter as f64;
        if rel <= cfg.rel_tol {
            report.converged = true;
            return (x, report);
        }
        if stagnated(&report.true_residual_history) {
            report.failure_kind = FailureKind::Stagnation;
            return (x, report);
        }
        if gamma_new == 0.0 {
            // Krylov space exhausted; the residual check above is final
            report.failure_kind = FailureKind::Stagnation;
            return (x, report);
        }

        v_old = std::mem::replace(&mut v, v_new);
        z = z_new;
        gamma_old = std::mem::replace(&mut gamma, gamma_new);
        c_old = std::mem::replace(&mut c, c_new);
        s_old = std::mem::replace(&mut s, s_new);
        w_old = std::mem::replace(&mut w, w_new);
    }
    report.failure_kind = FailureKind::MaxIters;
    (x, report)
}
