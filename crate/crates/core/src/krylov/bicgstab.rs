use super::{FailureKind, LinearOperator, SolveConfig, SolveReport};
use crate::precond::PreconditionerAction;
use crate::sparse::{axpy, dot, norm2};

// Absolute guard on the BiCGStab scalars rho, r~'v and t't: beyond it the
// recurrence has degenerated (the asterisk marker in result tables).
const SCALAR_GUARD: f64 = 1e-300;

/// Right-preconditioned BiCGStab with half-iteration accounting.
///
/// Convergence is checked after the intermediate `s`-vector update (counting
/// half an iteration) and again after the stabilization step, so
/// `outer_iters` may end in `.5`. Scalar under/overflow is reported as
/// scalar breakdown.
pub fn bicgstab(
    op: &dyn LinearOperator,
    precond: &dyn PreconditionerAction,
    b: &[f64],
    cfg: &SolveConfig,
) -> (Vec<f64>, SolveReport) {
    let n = op.dim();
    assert_eq!(b.len(), n);
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

    let r_shadow = r.clone();
    let mut rho = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];

    let breakdown = |report: &mut SolveReport, count: f64| {
        report.failure_kind = FailureKind::ScalarBreakdown;
        report.outer_iters = count;
    };

    for iter in 1..=cfg.max_iters {
        let rho_new = dot(&r_shadow, &r);
        if !rho_new.is_finite() || rho_new.abs() < SCALAR_GUARD {
            breakdown(&mut report, (iter - 1) as f64);
            return (x, report);
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        let p_hat = precond.apply(&p);
        op.apply_into(&p_hat, &mut v);
        let denom = dot(&r_shadow, &v);
        if !denom.is_finite() || denom.abs() < SCALAR_GUARD {
            breakdown(&mut report, (iter - 1) as f64);
            return (x, report);
        }
        alpha = rho / denom;
        // half step: s = r - alpha v
        let mut s = r.clone();
        axpy(-alpha, &v, &mut s);
        let half_rel = norm2(&s) / bnorm;
        if !half_rel.is_finite() {
            breakdown(&mut report, (iter - 1) as f64);
            return (x, report);
        }
        if half_rel <= cfg.rel_tol {
            axpy(alpha, &p_hat, &mut x);
            report.true_residual_history.push(half_rel);
            report.outer_iters = iter as f64 - 0.5;
            report.converged = true;
            return (x, report);
        }
        let s_hat = precond.apply(&s);
        let t = op.apply(&s_hat);
        let tt = dot(&t, &t);
        if !tt.is_finite() || tt.abs() < SCALAR_GUARD {
            breakdown(&mut report, iter as f64 - 0.5);
            return (x, report);
        }
        omega = dot(&t, &s) / tt;
        if !omega.is_finite() || omega.abs() < SCALAR_GUARD {
            breakdown(&mut report, iter as f64 - 0.5);
            return (x, report);
        }
        axpy(alpha, &p_hat, &mut x);
        axpy(omega, &s_hat, &mut x);
        r = s;
        axpy(-omega, &t, &mut r);
        let rel = norm2(&r) / bnorm;
        report.true_residual_history.push(rel);
        report.outer_iters = iter as f64;
        if !rel.is_finite() {
            breakdown(&mut report, iter as f64);
            return (x, report);
        }
        if rel <= cfg.rel_tol {
            report.converged = true;
            return (x, report);
        }
    }
    report.failure_kind = FailureKind::MaxIters;
    (x, report)
}
